"""Serialization of fitted models into the sectioned container format."""

import numpy as np

from .efr import EfrModel, NormStage
from .formats import read_model_container, write_model_container
from .gmm import DiagonalGmm
from .pipeline import BackendSpec, Subsystem, SystemModel
from .plda import PldaModel
from .projections import LdaModel, MeanVarNorm, PcaModel, PpcaNapModel


def save_gmm(path, gmm):
    write_model_container(
        path,
        "diagonal_gmm",
        {"weights": gmm.weights, "means": gmm.means, "variances": gmm.variances},
        meta={"components": gmm.num_components, "dim": gmm.dim},
    )


def load_gmm(path):
    _, sections, _ = read_model_container(path, expect_type="diagonal_gmm")
    gmm = DiagonalGmm(
        weights=sections["weights"][0],
        means=sections["means"],
        variances=sections["variances"],
    )
    gmm.validate()
    return gmm


def save_plda(path, model):
    write_model_container(
        path,
        "plda",
        {
            "mean": model.mean,
            "speaker_loading": model.speaker_loading,
            "channel_loading": model.channel_loading,
            "residual_var": model.residual_var,
        },
        meta={
            "dim": model.dim,
            "q_speaker": model.q_speaker,
            "q_channel": model.q_channel,
        },
    )


def load_plda(path):
    _, sections, meta = read_model_container(path, expect_type="plda")
    dim = int(meta["dim"])
    return PldaModel(
        mean=sections["mean"][0],
        speaker_loading=sections["speaker_loading"].reshape(dim, int(meta["q_speaker"])),
        channel_loading=sections["channel_loading"].reshape(dim, int(meta["q_channel"])),
        residual_var=sections["residual_var"][0],
    )


def _stage_sections(prefix, stages, sections):
    for k, stage in enumerate(stages):
        sections["%s/stage%d/mean" % (prefix, k)] = stage.mean
        sections["%s/stage%d/whitener" % (prefix, k)] = stage.whitener


def _stage_from_sections(prefix, count, sections):
    return [
        NormStage(
            mean=sections["%s/stage%d/mean" % (prefix, k)][0],
            whitener=sections["%s/stage%d/whitener" % (prefix, k)],
        )
        for k in range(count)
    ]


def _subsystem_sections(prefix, sub, sections, meta):
    info = {"kind": sub.kind}
    if sub.normalizer is not None:
        sections[prefix + "/meanvar/mean"] = sub.normalizer.mean
        sections[prefix + "/meanvar/std"] = sub.normalizer.std
        sections[prefix + "/meanvar/constant"] = sub.normalizer.constant_dims.astype(np.float64)
    if sub.lda is not None:
        sections[prefix + "/lda/mean"] = sub.lda.mean
        sections[prefix + "/lda/basis"] = sub.lda.basis
        sections[prefix + "/lda/eigenvalues"] = sub.lda.eigenvalues
    if sub.pca is not None:
        sections[prefix + "/pca/mean"] = sub.pca.mean
        sections[prefix + "/pca/basis"] = sub.pca.basis
        sections[prefix + "/pca/eigenvalues"] = sub.pca.eigenvalues
    if sub.nap is not None:
        sections[prefix + "/nap/loading"] = sub.nap.loading
    if sub.efr is not None:
        _stage_sections(prefix + "/efr", sub.efr.stages, sections)
        sections[prefix + "/efr/within_inv"] = sub.efr.within_inv
        info["efr_stages"] = len(sub.efr.stages)
        info["efr_regularized"] = bool(sub.efr.within_regularized)
    if sub.norm_stages is not None:
        _stage_sections(prefix + "/norm", sub.norm_stages, sections)
        info["norm_stages"] = len(sub.norm_stages)
    if sub.plda is not None:
        sections[prefix + "/plda/mean"] = sub.plda.mean
        sections[prefix + "/plda/speaker_loading"] = sub.plda.speaker_loading
        sections[prefix + "/plda/channel_loading"] = sub.plda.channel_loading
        sections[prefix + "/plda/residual_var"] = sub.plda.residual_var
        info["plda_dims"] = [sub.plda.dim, sub.plda.q_speaker, sub.plda.q_channel]
    meta[prefix] = info


def _subsystem_from_sections(prefix, sections, info):
    sub = Subsystem(kind=info["kind"])
    if prefix + "/meanvar/mean" in sections:
        sub.normalizer = MeanVarNorm(
            mean=sections[prefix + "/meanvar/mean"][0],
            std=sections[prefix + "/meanvar/std"][0],
            constant_dims=sections[prefix + "/meanvar/constant"][0] > 0.5,
        )
    if prefix + "/lda/mean" in sections:
        sub.lda = LdaModel(
            mean=sections[prefix + "/lda/mean"][0],
            basis=sections[prefix + "/lda/basis"],
            eigenvalues=sections[prefix + "/lda/eigenvalues"][0],
        )
    if prefix + "/pca/mean" in sections:
        sub.pca = PcaModel(
            mean=sections[prefix + "/pca/mean"][0],
            basis=sections[prefix + "/pca/basis"],
            eigenvalues=sections[prefix + "/pca/eigenvalues"][0],
        )
    if prefix + "/nap/loading" in sections:
        sub.nap = PpcaNapModel(loading=sections[prefix + "/nap/loading"])
    if "efr_stages" in info:
        sub.efr = EfrModel(
            stages=_stage_from_sections(prefix + "/efr", info["efr_stages"], sections),
            within_inv=sections[prefix + "/efr/within_inv"],
            within_regularized=bool(info.get("efr_regularized", False)),
        )
    if "norm_stages" in info:
        sub.norm_stages = _stage_from_sections(prefix + "/norm", info["norm_stages"], sections)
    if "plda_dims" in info:
        dim, qs, qc = (int(v) for v in info["plda_dims"])
        sub.plda = PldaModel(
            mean=sections[prefix + "/plda/mean"][0],
            speaker_loading=sections[prefix + "/plda/speaker_loading"].reshape(dim, qs),
            channel_loading=sections[prefix + "/plda/channel_loading"].reshape(dim, qc),
            residual_var=sections[prefix + "/plda/residual_var"][0],
        )
    return sub


def save_system(path, system):
    spec = system.spec
    meta = {
        "spec": {
            "kind": spec.kind,
            "q": spec.q,
            "q_speaker": spec.q_speaker,
            "q_channel": spec.q_channel,
            "efr_iterations": spec.efr_iterations,
            "ppca_iterations": spec.ppca_iterations,
            "plda_iterations": spec.plda_iterations,
            "lda_ridge": spec.lda_ridge,
            "seed": spec.seed,
        },
        "input_dim": system.input_dim,
        "window": system.window,
        "subsystems": len(system.subsystems),
    }
    sections = {}
    for i, sub in enumerate(system.subsystems):
        _subsystem_sections("s%d" % i, sub, sections, meta)
    write_model_container(path, "system", sections, meta=meta)


def load_system(path):
    _, sections, meta = read_model_container(path, expect_type="system")
    spec = BackendSpec(**meta["spec"])
    subsystems = [
        _subsystem_from_sections("s%d" % i, sections, meta["s%d" % i])
        for i in range(int(meta["subsystems"]))
    ]
    window = meta["window"]
    return SystemModel(
        spec=spec,
        input_dim=int(meta["input_dim"]),
        window=None if window is None else int(window),
        subsystems=subsystems,
    )
