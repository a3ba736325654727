"""Command line front end.

Subcommands cover the whole pipeline: corpus synthesis, background-model
training, super-vector extraction, windowing, back-end training, trial
scoring, fusion, metric reports, and parameter sweeps.  Reports can render
figures next to their delimited outputs.

Every subcommand accepts --config FILE holding key=value lines whose keys
are the long flag names; explicit flags override the file, and unknown
keys are rejected.  Environment variables are never consulted.  Failures
exit nonzero with a single diagnostic line on stderr.
"""

import argparse
import os
import sys

import numpy as np

from . import formats, metrics, pipeline, store, synthdata
from .errors import MvkitError, TrialMismatch
from .gmm import UbmConfig, train_ubm
from .mllr import RegressionClassMap, build_supervector, estimate_mllr
from .mvector import plan_windows
from .metrics import ScoreSet, Trial


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, "ERROR UsageError: %s\n" % message.replace("\n", " "))


def _require_files(*paths):
    for p in paths:
        if p is None:
            continue
        if not os.path.exists(p):
            raise FileNotFoundError("input path does not exist: %s" % p)


def _inject_config(argv):
    """Splice --config entries in front of explicit flags so the command
    line wins on conflicts."""
    if "--config" not in argv:
        return argv
    at = argv.index("--config")
    if at + 1 >= len(argv):
        return argv  # parser reports the missing value
    path = argv[at + 1]
    _require_files(path)
    injected = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise formats.FormatError("%s: bad config line %r" % (path, line))
            key, value = line.split("=", 1)
            flag = "--" + key.strip().replace("_", "-")
            injected.extend([flag, value.strip()])
    rest = argv[:at] + argv[at + 2 :]
    if not rest:
        return injected
    # keep the subcommand first, then config values, then explicit flags
    return rest[:1] + injected + rest[1:]


def _vectors_with_labels(vec_path, labels_path):
    vectors = formats.read_vec(vec_path)
    sessions, speakers = formats.read_labels(labels_path)
    if len(sessions) != vectors.shape[0]:
        raise formats.FormatError(
            "%s lists %d rows but %s holds %d"
            % (labels_path, len(sessions), vec_path, vectors.shape[0])
        )
    return vectors, sessions, speakers


def _session_map(vectors, sessions):
    return {ses: vectors[i] for i, ses in enumerate(sessions)}


def _backend_spec(args):
    q = None
    if args.kind in ("lda-efr", "cascade"):
        q = args.lda_q
    elif args.kind == "pca-efr":
        q = args.pca_q
    elif args.kind == "nap-efr":
        q = args.nap_q
    q_speaker = q_channel = None
    if args.plda is not None:
        parts = args.plda.split(",")
        if len(parts) != 2:
            raise ValueError("--plda expects q_speaker,q_channel")
        q_speaker, q_channel = int(parts[0]), int(parts[1])
    return pipeline.BackendSpec(
        kind=args.kind,
        q=q,
        q_speaker=q_speaker,
        q_channel=q_channel,
        efr_iterations=args.efr_iters,
        ppca_iterations=args.ppca_iters,
        plda_iterations=args.plda_iters,
        lda_ridge=args.lda_ridge,
        seed=args.seed,
    )


def _parse_window(text):
    if text is None or text == "full":
        return None
    return int(text)


def _add_backend_flags(sp):
    sp.add_argument("--kind", required=True, choices=pipeline.KINDS)
    sp.add_argument("--lda-q", type=int, help="discriminant directions (lda-efr, cascade)")
    sp.add_argument("--pca-q", type=int, help="principal directions (pca-efr)")
    sp.add_argument("--nap-q", type=int, help="nuisance subspace size (nap-efr)")
    sp.add_argument("--plda", help="q_speaker,q_channel factor sizes (plda, cascade)")
    sp.add_argument("--window", default="full", help="window length or 'full'")
    sp.add_argument("--efr-iters", type=int, default=2)
    sp.add_argument("--ppca-iters", type=int, default=30)
    sp.add_argument("--plda-iters", type=int, default=20)
    sp.add_argument("--lda-ridge", type=float, default=1e-6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)


def _cmd_synth_gen(args):
    if args.kind == "gmm":
        spec = synthdata.GmmCorpusSpec(
            seed=args.seed,
            speakers=args.speakers,
            sessions_per_speaker=args.sessions,
            frames_per_session=args.frames,
            dim=args.dim,
            components=args.components,
            speaker_strength=args.speaker_strength,
            channel_strength=args.channel_strength,
        )
        _, _, manifest_rows = synthdata.gen_gmm_corpus(spec, args.out)
        sessions = [r[0] for r in manifest_rows]
        speakers = [r[1] for r in manifest_rows]
    else:
        spec = synthdata.PldaCorpusSpec(
            seed=args.seed,
            speakers=args.speakers,
            sessions_per_speaker=args.sessions,
            dim=args.dim,
            q_speaker=args.q_speaker,
            q_channel=args.q_channel,
            speaker_scale=args.speaker_scale,
            channel_scale=args.channel_scale,
            noise_scale=args.noise_scale,
        )
        _, _, sessions, speakers = synthdata.gen_plda_corpus(spec, args.out)
    trials = synthdata.build_trials(
        sessions, speakers, args.seed, targets=args.trial_targets, nontargets=args.trial_nontargets
    )
    formats.write_trials(os.path.join(args.out, "trials.txt"), trials)
    print("wrote %s corpus with %d sessions to %s" % (args.kind, len(sessions), args.out))
    return 0


def _cmd_ubm_train(args):
    _require_files(args.manifest)
    rows = formats.read_manifest(args.manifest)
    base = os.path.dirname(os.path.abspath(args.manifest))
    _require_files(*(os.path.join(base, rel) for _, _, rel in rows))
    frames = np.concatenate(
        [formats.read_frames(os.path.join(base, rel)) for _, _, rel in rows]
    )
    config = UbmConfig(
        max_em_iters=args.max_iters,
        var_floor_fraction=args.var_floor_fraction,
        seed=args.seed,
    )
    gmm = train_ubm(frames, args.components, config)
    store.save_gmm(args.out, gmm)
    print(
        "trained %d-component model on %d frames, final loglik %.6g"
        % (args.components, frames.shape[0], gmm.loglik_history[-1])
    )
    return 0


def _cmd_mllr_extract(args):
    _require_files(args.ubm, args.manifest, args.class_map)
    gmm = store.load_gmm(args.ubm)
    rows = formats.read_manifest(args.manifest)
    base = os.path.dirname(os.path.abspath(args.manifest))
    _require_files(*(os.path.join(base, rel) for _, _, rel in rows))
    if args.class_map:
        class_map = RegressionClassMap(formats.read_class_map(args.class_map))
    else:
        class_map = RegressionClassMap.single_class(gmm.num_components)
    supervectors = []
    sessions, speakers = [], []
    for ses, spk, rel in rows:
        frames = formats.read_frames(os.path.join(base, rel))
        transform = estimate_mllr(
            gmm,
            frames,
            class_map,
            iterations=args.iterations,
            occupancy_threshold=args.occupancy_threshold,
        )
        supervectors.append(build_supervector(transform, spk, ses).values)
        sessions.append(ses)
        speakers.append(spk)
    formats.write_vec(args.out, np.stack(supervectors))
    formats.write_labels(args.out_labels, sessions, speakers)
    print("extracted %d super-vectors of dim %d" % (len(sessions), supervectors[0].size))
    return 0


def _cmd_segment(args):
    _require_files(args.vectors)
    vectors = formats.read_vec(args.vectors)
    plan = plan_windows(vectors.shape[1], args.window)
    for w, offset in enumerate(plan.offsets):
        formats.write_vec(
            "%s.w%02d.vec" % (args.out_prefix, w),
            vectors[:, offset : offset + plan.window],
        )
    written = plan.count
    if args.cross:
        pieces = [vectors[:, o : o + plan.window] for o in plan.offsets]
        for i in range(plan.count):
            for j in range(i + 1, plan.count):
                formats.write_vec(
                    "%s.x%02d-%02d.vec" % (args.out_prefix, i, j),
                    np.concatenate([pieces[i], pieces[j]], axis=1),
                )
                written += 1
    with open("%s.plan.tsv" % args.out_prefix, "w", encoding="ascii") as fh:
        fh.write("#window=%d length=%d\n" % (plan.window, plan.vector_length))
        for w, offset in enumerate(plan.offsets):
            fh.write("%d\t%d\n" % (w, offset))
    print("wrote %d window files for plan %s" % (written, list(plan.offsets)))
    return 0


def _cmd_backend_train(args):
    _require_files(args.vectors, args.labels)
    vectors, _, speakers = _vectors_with_labels(args.vectors, args.labels)
    spec = _backend_spec(args)
    system = pipeline.train_system(
        spec, vectors, speakers, window=_parse_window(args.window), threads=args.threads
    )
    store.save_system(args.out, system)
    print(
        "trained %s system with %d subsystem(s) on %d vectors"
        % (spec.kind, len(system.subsystems), vectors.shape[0])
    )
    return 0


def _cmd_score(args):
    _require_files(args.system, args.enroll_vec, args.enroll_labels, args.test_vec, args.test_labels, args.trials)
    system = store.load_system(args.system)
    e_vec, e_ses, _ = _vectors_with_labels(args.enroll_vec, args.enroll_labels)
    t_vec, t_ses, _ = _vectors_with_labels(args.test_vec, args.test_labels)
    trials = formats.read_trials(args.trials)
    result = pipeline.score_trials(
        system,
        _session_map(e_vec, e_ses),
        _session_map(t_vec, t_ses),
        trials,
        threads=args.threads,
    )
    formats.write_scores(args.out, result.trials, result.scores)
    if args.subsystem_out:
        for i in range(result.subsystem_scores.shape[0]):
            formats.write_scores(
                "%s.s%02d.txt" % (args.subsystem_out, i),
                result.trials,
                result.subsystem_scores[i],
            )
    print("scored %d trials with %d subsystem(s)" % (len(trials), len(system.subsystems)))
    return 0


def _load_score_set(path, label_by_key=None):
    keys, values = formats.read_scores(path)
    trials = []
    for enroll, test in keys:
        label = metrics.UNKNOWN if label_by_key is None else label_by_key.get((enroll, test))
        if label is None:
            raise TrialMismatch("score for unlisted trial (%s, %s) in %s" % (enroll, test, path))
        trials.append(Trial(enroll, test, label))
    return ScoreSet(trials=trials, scores=values)


def _cmd_fuse(args):
    if args.early:
        if not args.labels or len(args.labels) != len(args.vectors):
            raise ValueError("--early needs one --labels file per --vectors file")
        _require_files(*args.vectors, *args.labels)
        maps = []
        first_sessions = None
        speaker_of = {}
        for vec_path, lab_path in zip(args.vectors, args.labels):
            vectors, sessions, speakers = _vectors_with_labels(vec_path, lab_path)
            maps.append(_session_map(vectors, sessions))
            speaker_of.update(dict(zip(sessions, speakers)))
            if first_sessions is None:
                first_sessions = sessions
        fused = pipeline.early_fuse(maps)
        out = np.stack([fused[s] for s in first_sessions])
        formats.write_vec(args.out, out)
        if args.out_labels:
            formats.write_labels(
                args.out_labels, first_sessions, [speaker_of[s] for s in first_sessions]
            )
        print("concatenated %d sets into dim %d" % (len(maps), out.shape[1]))
        return 0
    _require_files(*args.scores)
    weights = None
    if args.weights:
        weights = [float(w) for w in args.weights.split(",")]
    sets = [_load_score_set(p) for p in args.scores]
    fused = pipeline.late_fuse(sets, weights=weights, standardize=args.standardize)
    formats.write_scores(args.out, fused.trials, fused.scores)
    print("fused %d score sets over %d trials" % (len(sets), len(fused.trials)))
    return 0


def _dcf_params(args):
    if args.p_target is not None or args.c_miss is not None or args.c_fa is not None:
        if None in (args.p_target, args.c_miss, args.c_fa):
            raise ValueError("custom cost needs all of --p-target, --c-miss, --c-fa")
        return metrics.DcfParams(c_miss=args.c_miss, c_fa=args.c_fa, p_target=args.p_target), "custom"
    return metrics.DCF_PRESETS[args.dcf], args.dcf


def _evaluate_scores(score_path, trials_path):
    trials = formats.read_trials(trials_path)
    label_by_key = {t.key: t.label for t in trials}
    if len(label_by_key) != len(trials):
        raise TrialMismatch("duplicate trial keys in %s" % trials_path)
    sset = _load_score_set(score_path, label_by_key)
    if len(sset.trials) != len(trials):
        raise TrialMismatch(
            "%s scores %d trials, %s lists %d"
            % (score_path, len(sset.trials), trials_path, len(trials))
        )
    return sset


def _cmd_eval(args):
    _require_files(args.scores, args.trials)
    sset = _evaluate_scores(args.scores, args.trials)
    eer, threshold = metrics.compute_eer(sset)
    params, preset = _dcf_params(args)
    mindcf = metrics.compute_mindcf(sset, params)
    lines = [
        "eer=%.17g" % eer,
        "eer_threshold=%.17g" % threshold,
        "mindcf_%s=%.17g" % (preset, mindcf),
        "targets=%d" % sset.target_scores().size,
        "nontargets=%d" % sset.nontarget_scores().size,
    ]
    if args.report:
        with open(args.report, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    if args.det_plot:
        from . import plotting

        plotting.plot_det_curve(metrics.det_points(sset), args.det_plot)
    print("eer=%.4f%% mindcf_%s=%.4f" % (100.0 * eer, preset, mindcf))
    return 0


def _cmd_sweep(args):
    _require_files(args.vectors, args.labels, args.enroll_vec, args.enroll_labels, args.test_vec, args.test_labels, args.trials)
    vectors, _, speakers = _vectors_with_labels(args.vectors, args.labels)
    e_vec, e_ses, _ = _vectors_with_labels(args.enroll_vec, args.enroll_labels)
    t_vec, t_ses, _ = _vectors_with_labels(args.test_vec, args.test_labels)
    trials = formats.read_trials(args.trials)
    enroll_map = _session_map(e_vec, e_ses)
    test_map = _session_map(t_vec, t_ses)
    params, preset = _dcf_params(args)

    values = args.values.split(",")
    rows = []
    for raw in values:
        spec = _backend_spec(args)
        window = _parse_window(args.window)
        if args.param == "window":
            window = _parse_window(raw)
            shown = "full" if window is None else str(window)
        else:
            value = int(raw)
            shown = raw
            if args.param == "proj-q":
                spec.q = value
            elif args.param == "q-speaker":
                spec.q_speaker = value
            elif args.param == "q-channel":
                spec.q_channel = value
        system = pipeline.train_system(spec, vectors, speakers, window=window, threads=args.threads)
        result = pipeline.score_trials(system, enroll_map, test_map, trials, threads=args.threads)
        eer, _ = metrics.compute_eer(result)
        mindcf = metrics.compute_mindcf(result, params)
        rows.append((shown, eer, mindcf))
        print("%s=%s\teer=%.4f%%\tmindcf_%s=%.4f" % (args.param, shown, 100 * eer, preset, mindcf))

    with open(args.table, "w", encoding="ascii") as fh:
        fh.write("#%s\teer\tmindcf_%s\n" % (args.param, preset))
        for shown, eer, mindcf in rows:
            fh.write("%s\t%.17g\t%.17g\n" % (shown, eer, mindcf))
    if args.plot:
        from . import plotting

        numeric = [len(vectors[0]) if v == "full" else float(v) for v, _, _ in rows]
        plotting.plot_sweep(
            numeric,
            [r[1] for r in rows],
            [r[2] for r in rows],
            args.param,
            args.plot,
        )
    return 0


def _build_parser():
    parser = _Parser(prog="mvkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth-gen", parents=[], help="generate a seeded synthetic corpus")
    sp.add_argument("--config", help=argparse.SUPPRESS)
    sp.add_argument("--kind", required=True, choices=("gmm", "plda"))
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--speakers", type=int, default=10)
    sp.add_argument("--sessions", type=int, default=2)
    sp.add_argument("--frames", type=int, default=1000)
    sp.add_argument("--dim", type=int, default=8)
    sp.add_argument("--components", type=int, default=16)
    sp.add_argument("--speaker-strength", type=float, default=0.1)
    sp.add_argument("--channel-strength", type=float, default=0.0)
    sp.add_argument("--q-speaker", type=int, default=4)
    sp.add_argument("--q-channel", type=int, default=2)
    sp.add_argument("--speaker-scale", type=float, default=1.0)
    sp.add_argument("--channel-scale", type=float, default=0.5)
    sp.add_argument("--noise-scale", type=float, default=0.3)
    sp.add_argument("--trial-targets", type=int)
    sp.add_argument("--trial-nontargets", type=int)
    sp.set_defaults(handler=_cmd_synth_gen)

    sp = sub.add_parser("ubm-train", help="fit the background mixture on pooled frames")
    sp.add_argument("--config", help=argparse.SUPPRESS)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--components", type=int, default=512)
    sp.add_argument("--max-iters", type=int, default=50)
    sp.add_argument("--var-floor-fraction", type=float, default=1e-3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(handler=_cmd_ubm_train)

    sp = sub.add_parser("mllr-extract", help="estimate per-session transforms and stack super-vectors")
    sp.add_argument("--config", help=argparse.SUPPRESS)
    sp.add_argument("--ubm", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--class-map", help="text file with one class index per component")
    sp.add_argument("--iterations", type=int, default=1)
    sp.add_argument("--occupancy-threshold", type=float)
    sp.add_argument("--out", required=True)
    sp.add_argument("--out-labels", required=True)
    sp.set_defaults(handler=_cmd_mllr_extract)

    sp = sub.add_parser("segment", help="cut super-vectors into windowed sub-vectors")
    sp.add_argument("--config", help=argparse.SUPPRESS)
    sp.add_argument("--vectors", required=True)
    sp.add_argument("--window", type=int, required=True)
    sp.add_argument("--out-prefix", required=True)
    sp.add_argument("--cross", action="store_true", help="also write concatenated window pairs")
    sp.set_defaults(handler=_cmd_segment)

    sp = sub.add_parser("backend-train", help="fit a back-end system on labeled vectors")
    sp.add_argument("--config", help=argparse.SUPPRESS)
    sp.add_argument("--vectors", required=True)
    sp.add_argument("--labels", required=True)
    _add_backend_flags(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(handler=_cmd_backend_train)

    sp = sub.add_parser("score", help="score verification trials against a system")
    sp.add_argument("--config", help=argparse.SUPPRESS)
    sp.add_argument("--system", required=True)
    sp.add_argument("--enroll-vec", required=True)
    sp.add_argument("--enroll-labels", required=True)
    sp.add_argument("--test-vec", required=True)
    sp.add_argument("--test-labels", required=True)
    sp.add_argument("--trials", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--subsystem-out", help="prefix for per-subsystem score files")
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(handler=_cmd_score)

    sp = sub.add_parser("fuse", help="fuse score sets (late) or concatenate vectors (early)")
    sp.add_argument("--config", help=argparse.SUPPRESS)
    sp.add_argument("--early", action="store_true")
    sp.add_argument("--scores", nargs="*", default=[])
    sp.add_argument("--weights")
    sp.add_argument("--standardize", action="store_true")
    sp.add_argument("--vectors", nargs="*", default=[])
    sp.add_argument("--labels", nargs="*", default=[])
    sp.add_argument("--out", required=True)
    sp.add_argument("--out-labels")
    sp.set_defaults(handler=_cmd_fuse)

    sp = sub.add_parser("eval", help="compute EER and minDCF from scores and trial truth")
    sp.add_argument("--config", help=argparse.SUPPRESS)
    sp.add_argument("--scores", required=True)
    sp.add_argument("--trials", required=True)
    sp.add_argument("--dcf", choices=sorted(metrics.DCF_PRESETS), default="sre08")
    sp.add_argument("--p-target", type=float)
    sp.add_argument("--c-miss", type=float)
    sp.add_argument("--c-fa", type=float)
    sp.add_argument("--report")
    sp.add_argument("--det-plot", help="render the DET curve to this image file")
    sp.set_defaults(handler=_cmd_eval)

    sp = sub.add_parser("sweep", help="train/score/evaluate over one swept parameter")
    sp.add_argument("--config", help=argparse.SUPPRESS)
    sp.add_argument("--vectors", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--enroll-vec", required=True)
    sp.add_argument("--enroll-labels", required=True)
    sp.add_argument("--test-vec", required=True)
    sp.add_argument("--test-labels", required=True)
    sp.add_argument("--trials", required=True)
    _add_backend_flags(sp)
    sp.add_argument("--param", required=True, choices=("window", "proj-q", "q-speaker", "q-channel"))
    sp.add_argument("--values", required=True, help="comma-separated sweep values")
    sp.add_argument("--table", required=True, help="output TSV table")
    sp.add_argument("--plot", help="render the sweep trend to this image file")
    sp.add_argument("--dcf", choices=sorted(metrics.DCF_PRESETS), default="sre08")
    sp.add_argument("--p-target", type=float)
    sp.add_argument("--c-miss", type=float)
    sp.add_argument("--c-fa", type=float)
    sp.set_defaults(handler=_cmd_sweep)

    return parser


def main(argv=None):
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        argv = _inject_config(argv)
        parser = _build_parser()
        args = parser.parse_args(argv)
        return args.handler(args) or 0
    except SystemExit as exc:
        return exc.code or 0
    except (MvkitError, OSError, ValueError) as exc:
        sys.stderr.write("ERROR %s: %s\n" % (type(exc).__name__, str(exc).replace("\n", " ")))
        return 1


if __name__ == "__main__":
    sys.exit(main())
