"""Experiment configuration, the end-to-end run pipeline, and sweeps.

A run is fully determined by (config, seed): payload bits come from
per-band streams keyed by (seed, band index), noise from dedicated
streams, so identical inputs give byte-identical reports and adding a
band never perturbs the other bands' data.
"""

import copy
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .constellation import labels_to_bits
from .dsp import clip, papr_db, resample_rational
from .errors import ConfigError, DecodeError, StageError
from .linksim import (
    AdcConfig,
    DacConfig,
    LinkConfig,
    MzmConfig,
    PdConfig,
    adc_model,
    dac_model,
    edfa_and_voa,
    fiber_propagate,
    mzm_modulate,
    photodetect,
)
from .metrics import gmi_from_llrs, ngmi
from .planner import (
    BandSpec,
    SnrProfile,
    SubcarrierPlan,
    bpsk_mod,
    dispersion_nulls,
    entropy_load,
    estimate_snr_profile,
    pcs64,
    plan_bands,
    validate_plan,
)
from .rxchain import BandRxConfig, EqualizerConfig, band_receive
from .transmitter import FrameConfig, build_composite, make_modems
from .waveform import RealWaveform

import jsonschema

NOISE_KEY_THERMAL = 0x7E1A
NOISE_KEY_ASE = 0xA5E0

_NO_EXTRA = {"additionalProperties": False}

CONFIG_SCHEMA = {
    "type": "object",
    **_NO_EXTRA,
    "properties": {
        "link": {
            "type": "object",
            **_NO_EXTRA,
            "properties": {
                "wavelength_nm": {"type": "number"},
                "dispersion_ps_nm_km": {"type": "number"},
                "length_km": {"type": "number"},
                "fiber_loss_db_per_km": {"type": "number"},
                "launch_power_dbm": {"type": "number"},
                "edfa_gain_db": {"type": "number"},
                "edfa_noise_figure_db": {"type": ["number", "null"]},
                "rop_dbm": {"type": "number"},
                "sim_rate_gsa": {"type": "number"},
                "mzm": {
                    "type": "object",
                    **_NO_EXTRA,
                    "properties": {
                        "vpi": {"type": "number"},
                        "bias": {"type": "number"},
                        "drive_scale": {"type": "number"},
                        "bandwidth_ghz": {"type": ["number", "null"]},
                    },
                },
                "dac": {
                    "type": "object",
                    **_NO_EXTRA,
                    "properties": {
                        "rate_gsa": {"type": "number"},
                        "bandwidth_ghz": {"type": ["number", "null"]},
                        "bits": {"type": ["integer", "null"]},
                    },
                },
                "adc": {
                    "type": "object",
                    **_NO_EXTRA,
                    "properties": {
                        "rate_gsa": {"type": "number"},
                        "cutoff_ghz": {"type": ["number", "null"]},
                        "bits": {"type": ["integer", "null"]},
                    },
                },
                "pd": {
                    "type": "object",
                    **_NO_EXTRA,
                    "properties": {
                        "responsivity": {"type": "number"},
                        "bandwidth_ghz": {"type": ["number", "null"]},
                        "thermal_noise_psd": {"type": "number"},
                    },
                },
            },
        },
        "plan": {
            "type": "object",
            **_NO_EXTRA,
            "properties": {
                "span_ghz": {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "guard_mhz": {"type": "number"},
                "rolloff": {"type": "number"},
                "max_bands": {"type": "integer"},
                "gamma_db": {"type": "number"},
                "ngmi_threshold": {"type": "number"},
                "force_bpsk_top_bands": {"type": "integer"},
                "entropy_scale": {"type": "number"},
                "reference_cr_db": {"type": ["number", "null"]},
                "reference_rop_dbm": {"type": ["number", "null"]},
            },
        },
        "bands": {
            "type": "array",
            "items": {
                "type": "object",
                **_NO_EXTRA,
                "properties": {
                    "center_ghz": {"type": "number"},
                    "baud_gbd": {"type": "number"},
                    "rolloff": {"type": "number"},
                    "modulation": {"type": "string", "enum": ["pcs64qam", "bpsk"]},
                    "entropy": {"type": "number"},
                },
                "required": ["center_ghz", "baud_gbd", "modulation"],
            },
        },
        "clipping_cr_db": {"type": ["number", "string"]},
        "fec_overhead": {"type": "number"},
        "frame": {
            "type": "object",
            **_NO_EXTRA,
            "properties": {
                "preamble_symbols": {"type": "integer"},
                "payload_symbols": {"type": "integer"},
                "edge_margin_symbols": {"type": "integer"},
                "ccdm_block": {"type": "integer"},
                "shaping": {"type": "string", "enum": ["ccdm", "ideal"]},
                "rrc_span": {"type": "integer"},
            },
        },
        "rx": {
            "type": "object",
            **_NO_EXTRA,
            "properties": {
                "num_taps": {"type": "integer"},
                "step_size": {"type": "number"},
                "training_symbols": {"type": "integer"},
                "use_priors": {"type": "boolean"},
            },
        },
        "seed": {"type": "integer"},
        "sweep": {
            "type": "object",
            **_NO_EXTRA,
            "properties": {
                "axis": {"type": "string", "enum": ["clipping", "rop", "rate"]},
                "values": {"type": "array", "items": {"type": "number"}, "minItems": 2},
                "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
            },
            "required": ["axis", "values"],
        },
    },
}

DEFAULT_CONFIG = {
    "link": {
        "wavelength_nm": 1550.02,
        "dispersion_ps_nm_km": 17.0,
        "length_km": 100.0,
        "fiber_loss_db_per_km": 0.2,
        "launch_power_dbm": 6.89,
        "edfa_gain_db": 23.0,
        "edfa_noise_figure_db": None,
        "rop_dbm": -2.0,
        "sim_rate_gsa": 180.0,
        "mzm": {"vpi": 4.9, "bias": 2.45, "drive_scale": 0.10, "bandwidth_ghz": 30.0},
        "dac": {"rate_gsa": 90.0, "bandwidth_ghz": 16.0, "bits": 6},
        "adc": {"rate_gsa": 80.0, "cutoff_ghz": 36.0, "bits": 8},
        "pd": {"responsivity": 0.8, "bandwidth_ghz": 31.0, "thermal_noise_psd": 2e-22},
    },
    "plan": {
        "span_ghz": [0.5, 33.6],
        "guard_mhz": 125.0,
        "rolloff": 0.1,
        "max_bands": 16,
        "gamma_db": 5.5,
        "ngmi_threshold": 0.858,
        "force_bpsk_top_bands": 3,
        "entropy_scale": 1.0,
        "reference_cr_db": None,
        "reference_rop_dbm": None,
    },
    "clipping_cr_db": 8.0,
    "fec_overhead": 0.2,
    "frame": {
        "preamble_symbols": 1024,
        "payload_symbols": 200_000,
        "edge_margin_symbols": 32,
        "ccdm_block": 1000,
        "shaping": "ccdm",
        "rrc_span": 16,
    },
    "rx": {"num_taps": 33, "step_size": 2e-3, "training_symbols": 1024, "use_priors": True},
    "seed": 1,
}


def _deep_merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; raw holds the merged dict."""

    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(data, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid config: {exc.message} (at {list(exc.absolute_path)})")
        merged = _deep_merge(DEFAULT_CONFIG, data)
        cr = merged["clipping_cr_db"]
        if isinstance(cr, str):
            if cr not in ("inf", "+inf"):
                raise ConfigError(f"clipping_cr_db string must be 'inf', got {cr!r}")
            merged["clipping_cr_db"] = math.inf
        return cls(raw=merged)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}")
        return cls.from_dict(data)

    def link_config(self) -> LinkConfig:
        l = self.raw["link"]
        return LinkConfig(
            wavelength=l["wavelength_nm"] * 1e-9,
            dispersion=l["dispersion_ps_nm_km"] * 1e-6,
            length=l["length_km"] * 1e3,
            fiber_loss_db_per_km=l["fiber_loss_db_per_km"],
            launch_power_dbm=l["launch_power_dbm"],
            edfa_gain_db=l["edfa_gain_db"],
            edfa_noise_figure_db=l["edfa_noise_figure_db"],
            rop_dbm=l["rop_dbm"],
            sim_rate=l["sim_rate_gsa"] * 1e9,
            mzm=MzmConfig(
                vpi=l["mzm"]["vpi"],
                bias=l["mzm"]["bias"],
                drive_scale=l["mzm"]["drive_scale"],
                bandwidth_3db=_ghz(l["mzm"]["bandwidth_ghz"]),
            ),
            dac=DacConfig(
                rate=l["dac"]["rate_gsa"] * 1e9,
                bandwidth_3db=_ghz(l["dac"]["bandwidth_ghz"]),
                bits=l["dac"]["bits"],
            ),
            adc=AdcConfig(
                rate=l["adc"]["rate_gsa"] * 1e9,
                cutoff=_ghz(l["adc"]["cutoff_ghz"]),
                bits=l["adc"]["bits"],
            ),
            pd=PdConfig(
                responsivity=l["pd"]["responsivity"],
                bandwidth_3db=_ghz(l["pd"]["bandwidth_ghz"]),
                thermal_noise_psd=l["pd"]["thermal_noise_psd"],
            ),
        )

    def frame_config(self) -> FrameConfig:
        f = self.raw["frame"]
        return FrameConfig(
            preamble_symbols=f["preamble_symbols"],
            payload_symbols=f["payload_symbols"],
            edge_margin_symbols=f["edge_margin_symbols"],
            ccdm_block=f["ccdm_block"],
            shaping=f["shaping"],
            rrc_span=f["rrc_span"],
        )

    def eq_config(self) -> EqualizerConfig:
        r = self.raw["rx"]
        return EqualizerConfig(
            num_taps=r["num_taps"],
            step_size=r["step_size"],
            training_symbols=r["training_symbols"],
        )

    def with_overrides(self, **kv) -> "ExperimentConfig":
        return ExperimentConfig(raw=_deep_merge(self.raw, kv))


def _ghz(value):
    return None if value is None else value * 1e9


@dataclass(frozen=True)
class PlanInfo:
    plan: SubcarrierPlan
    nulls: np.ndarray
    snr: SnrProfile


def build_plan(cfg: ExperimentConfig) -> PlanInfo:
    """Null map -> packed bands -> SNR estimate -> entropy loading.

    Explicit ``bands`` in the config bypass the planner (replica/analysis
    runs); the paper-replica constraint of BPSK on the top bands is applied
    as a post-loading override.
    """
    link = cfg.link_config()
    plan_link = _plan_link(cfg)
    p = cfg.raw["plan"]
    span = (p["span_ghz"][0] * 1e9, p["span_ghz"][1] * 1e9)
    nulls = dispersion_nulls(link, f_max=span[1])

    if "bands" in cfg.raw:
        bands = []
        for b in cfg.raw["bands"]:
            mod = (
                bpsk_mod()
                if b["modulation"] == "bpsk"
                else pcs64(b.get("entropy", 6.0))
            )
            bands.append(
                BandSpec(
                    center=b["center_ghz"] * 1e9,
                    baud=b["baud_gbd"] * 1e9,
                    rolloff=b.get("rolloff", p["rolloff"]),
                    modulation=mod,
                )
            )
        plan = SubcarrierPlan(tuple(bands), p["guard_mhz"] * 1e6, span)
        snr = estimate_snr_profile(plan_link, plan, cr_db=_plan_cr(cfg))
        return PlanInfo(plan=plan, nulls=nulls, snr=snr)

    plan = plan_bands(
        nulls,
        span,
        guard=p["guard_mhz"] * 1e6,
        rolloff=p["rolloff"],
        max_bands=p["max_bands"],
        baud_grid_rate=link.dac.rate,
    )
    snr = estimate_snr_profile(plan_link, plan, cr_db=_plan_cr(cfg))
    loaded = entropy_load(
        plan,
        snr,
        ngmi_threshold=p["ngmi_threshold"],
        fec_overhead=cfg.raw["fec_overhead"],
        gamma_db=p["gamma_db"],
    )

    bands = list(loaded.bands)
    n_force = min(p["force_bpsk_top_bands"], len(bands))
    for i in range(len(bands) - n_force, len(bands)):
        if bands[i].modulation is not None:
            bands[i] = replace(bands[i], modulation=bpsk_mod())
    scale = p["entropy_scale"]
    if scale != 1.0:
        for i, band in enumerate(bands):
            if band.modulation is not None and band.modulation.kind == "pcs64qam":
                h = min(max(band.modulation.entropy * scale, 2.05), 6.0)
                bands[i] = replace(band, modulation=pcs64(h))
    loaded = SubcarrierPlan(tuple(bands), loaded.guard, loaded.span)
    validate_plan(loaded, nulls)
    return PlanInfo(plan=loaded, nulls=nulls, snr=snr)


def _cr(cfg: ExperimentConfig) -> float:
    return float(cfg.raw["clipping_cr_db"])


def _plan_cr(cfg: ExperimentConfig) -> float:
    """Clipping ratio the plan/loading is referenced to.

    Sweeping the clipping axis must not re-plan the signal, so the sweep
    pins this to the base configuration's value.
    """
    ref = cfg.raw["plan"]["reference_cr_db"]
    return float(ref) if ref is not None else _cr(cfg)


def _plan_link(cfg: ExperimentConfig) -> LinkConfig:
    """Link the plan/loading is referenced to (ROP pinned across sweeps)."""
    link = cfg.link_config()
    ref = cfg.raw["plan"]["reference_rop_dbm"]
    if ref is not None:
        link = replace(link, rop_dbm=float(ref))
    return link


@dataclass(frozen=True)
class BandMetrics:
    index: int
    center_hz: float
    baud_hz: float
    modulation: str
    entropy: float
    matched_rate: float
    ber: float
    bit_errors: int
    bits_counted: int
    gmi: float
    gmi_se: float
    ngmi: float
    snr_db: float
    pf_alpha: float
    eq_mse: float
    sync_peak: float
    payload_decoded: bool


@dataclass(frozen=True)
class MetricsReport:
    seed: int
    cr_db: float
    rop_dbm: float
    bands: tuple
    ber_aggregate: float
    ber_band_mean: float
    ngmi_rate_weighted: float
    ngmi_band_mean: float
    gross_bps: float
    net_bps: float
    capacity_reach_bps_km: float
    papr_unclipped_db: float
    papr_clipped_db: float

    def __post_init__(self):
        for b in self.bands:
            if not 0.0 <= b.ber <= 1.0:
                raise StageError("metrics", f"band {b.index} BER {b.ber} outside [0,1]")
            if b.ngmi > 1.0 + 1e-9:
                raise StageError("metrics", f"band {b.index} NGMI {b.ngmi} above 1")
            if b.gmi > b.entropy + 1e-9:
                raise StageError("metrics", f"band {b.index} GMI above entropy")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "cr_db": self.cr_db,
            "rop_dbm": self.rop_dbm,
            "aggregate": {
                "ber": self.ber_aggregate,
                "ber_band_mean": self.ber_band_mean,
                "ngmi_rate_weighted": self.ngmi_rate_weighted,
                "ngmi_band_mean": self.ngmi_band_mean,
                "gross_bps": self.gross_bps,
                "net_bps": self.net_bps,
                "capacity_reach_bps_km": self.capacity_reach_bps_km,
                "papr_unclipped_db": self.papr_unclipped_db,
                "papr_clipped_db": self.papr_clipped_db,
            },
            "bands": [vars(b) for b in self.bands],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def csv_rows(self, extra=None):
        """Long format: one row per band, aggregates repeated per row."""
        rows = []
        for b in self.bands:
            row = dict(extra or {})
            row.update(
                seed=self.seed,
                cr_db=self.cr_db,
                rop_dbm=self.rop_dbm,
                band=b.index,
                center_ghz=b.center_hz / 1e9,
                baud_gbd=b.baud_hz / 1e9,
                modulation=b.modulation,
                entropy=b.entropy,
                matched_rate=b.matched_rate,
                ber=b.ber,
                gmi=b.gmi,
                ngmi=b.ngmi,
                snr_db=b.snr_db,
                pf_alpha=b.pf_alpha,
                agg_ber=self.ber_aggregate,
                agg_ngmi_rw=self.ngmi_rate_weighted,
                net_gbps=self.net_bps / 1e9,
                capacity_reach_tbps_km=self.capacity_reach_bps_km / 1e12,
            )
            rows.append(row)
        return rows


CSV_FIELDS = [
    "axis",
    "value",
    "seed",
    "cr_db",
    "rop_dbm",
    "band",
    "center_ghz",
    "baud_gbd",
    "modulation",
    "entropy",
    "matched_rate",
    "ber",
    "gmi",
    "ngmi",
    "snr_db",
    "pf_alpha",
    "agg_ber",
    "agg_ngmi_rw",
    "net_gbps",
    "capacity_reach_tbps_km",
]


@dataclass
class RunArtifacts:
    plan_info: PlanInfo
    capture: RealWaveform
    composite: RealWaveform
    band_results: list
    tx_records: list
    modems: list


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def run_experiment(cfg: ExperimentConfig, seed: int = None, keep_artifacts: bool = False):
    """Full deterministic chain; returns (MetricsReport, RunArtifacts|None)."""
    seed = cfg.raw["seed"] if seed is None else int(seed)
    link = _stage("config", cfg.link_config)
    frame = _stage("config", cfg.frame_config)
    cr_db = _cr(cfg)

    plan_info = _stage("plan", build_plan, cfg)
    modems, total_samples = _stage(
        "plan", make_modems, plan_info.plan, frame, link.dac.rate
    )
    composite, records = _stage(
        "tx", build_composite, modems, seed, total_samples, link.dac.rate
    )

    papr_unclipped = papr_db(composite)
    clipped = _stage("clip", clip, composite, cr_db)
    papr_clipped = papr_db(clipped)

    dac_out = _stage("dac", dac_model, clipped, link)
    ratio = link.sim_rate / link.dac.rate
    analog = _stage(
        "dac", resample_rational, dac_out, int(round(ratio * 2)), 2
    )
    # map to drive volts: rms follows the clip level so a higher clipping
    # ratio trades peak headroom for drive power (fixed DAC full scale)
    cr_eff = min(cr_db, papr_clipped)
    target_rms = link.mzm.drive_scale * link.mzm.vpi * 10.0 ** (-cr_eff / 20.0)
    rms = math.sqrt(np.mean(analog.samples**2))
    volts = RealWaveform(analog.samples * (target_rms / rms), link.sim_rate)

    field_out = _stage("mzm", mzm_modulate, volts, link)
    field_out = _stage("fiber", fiber_propagate, field_out, link)
    rng_ase = np.random.default_rng(np.random.SeedSequence((seed, NOISE_KEY_ASE)))
    field_out = _stage("edfa-voa", edfa_and_voa, field_out, link, rng_ase)
    rng_th = np.random.default_rng(np.random.SeedSequence((seed, NOISE_KEY_THERMAL)))
    current = _stage("pd", photodetect, field_out, link, rng_th)
    # TIA differential output: no DC reaches the ADC
    current = RealWaveform(current.samples - current.samples.mean(), link.sim_rate)
    capture = _stage("adc", adc_model, current, link)

    eq_cfg = cfg.eq_config()
    if eq_cfg.training_symbols > frame.preamble_symbols:
        eq_cfg = replace(eq_cfg, training_symbols=frame.preamble_symbols)
    use_priors = cfg.raw["rx"]["use_priors"]
    band_metrics = []
    band_results = []
    total_errors = 0
    total_bits = 0
    for modem, rec in zip(modems, records):
        rx = BandRxConfig(
            constellation=modem.constellation,
            preamble=modem.preamble(),
            n_payload=modem.n_payload,
            eq=eq_cfg,
            rrc_span=frame.rrc_span,
            use_priors=use_priors,
            band_index=modem.index,
        )
        result = _stage(f"rx-band{modem.index}", band_receive, capture, modem.band, rx)
        band_results.append(result)

        tx_labels = rec.label_bits
        rx_labels = labels_to_bits(result.indices, modem.constellation)
        errors = int(np.sum(tx_labels != rx_labels))
        bits_n = tx_labels.size
        total_errors += errors
        total_bits += bits_n

        m = modem.constellation.m
        entropy = modem.constellation.entropy()
        bits_matrix = modem.constellation.label_bits[rec.indices]
        gmi, gmi_se = gmi_from_llrs(result.llrs, bits_matrix, entropy)
        band_ngmi = ngmi(min(gmi, entropy), entropy, m)

        decoded = False
        if frame.shaping == "ccdm":
            if modem.shaper is None:
                decoded = True  # BPSK bits are the indices themselves
            else:
                try:
                    modem.shaper.decode(result.indices)
                    decoded = True
                except DecodeError:
                    decoded = False

        band_metrics.append(
            BandMetrics(
                index=modem.index,
                center_hz=modem.band.center,
                baud_hz=modem.band.baud,
                modulation=modem.band.modulation.kind,
                entropy=entropy,
                matched_rate=modem.matched_rate(),
                ber=errors / bits_n,
                bit_errors=errors,
                bits_counted=bits_n,
                gmi=gmi,
                gmi_se=gmi_se,
                ngmi=band_ngmi,
                snr_db=result.snr_db,
                pf_alpha=result.alpha,
                eq_mse=result.eq_mse,
                sync_peak=result.sync.peak,
                payload_decoded=decoded,
            )
        )

    weights = np.array([bm.baud_hz * bm.entropy for bm in band_metrics])
    ngmis = np.array([bm.ngmi for bm in band_metrics])
    gross = float(weights.sum())
    fec = cfg.raw["fec_overhead"]
    net = sum(bm.baud_hz * bm.matched_rate for bm in band_metrics) / (1.0 + fec)
    report = MetricsReport(
        seed=seed,
        cr_db=cr_db,
        rop_dbm=link.rop_dbm,
        bands=tuple(band_metrics),
        ber_aggregate=total_errors / total_bits,
        ber_band_mean=float(np.mean([bm.ber for bm in band_metrics])),
        ngmi_rate_weighted=float(np.sum(weights * ngmis) / weights.sum()),
        ngmi_band_mean=float(ngmis.mean()),
        gross_bps=gross,
        net_bps=net,
        capacity_reach_bps_km=net * link.length / 1e3,
        papr_unclipped_db=papr_unclipped,
        papr_clipped_db=papr_clipped,
    )
    artifacts = (
        RunArtifacts(
            plan_info=plan_info,
            capture=capture,
            composite=composite,
            band_results=band_results,
            tx_records=records,
            modems=modems,
        )
        if keep_artifacts
        else None
    )
    return report, artifacts


def apply_axis(cfg: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    if axis == "clipping":
        # freeze the band plan at the base configuration's clipping ratio
        return cfg.with_overrides(
            clipping_cr_db=float(value), plan={"reference_cr_db": _plan_cr(cfg)}
        )
    if axis == "rop":
        # freeze the band plan at the base configuration's receive power
        base_rop = cfg.raw["plan"]["reference_rop_dbm"]
        if base_rop is None:
            base_rop = cfg.raw["link"]["rop_dbm"]
        return cfg.with_overrides(
            link={"rop_dbm": float(value)}, plan={"reference_rop_dbm": base_rop}
        )
    if axis == "rate":
        return cfg.with_overrides(plan={"entropy_scale": float(value)})
    raise ConfigError(f"unknown sweep axis {axis!r}")


@dataclass(frozen=True)
class SweepCell:
    axis: str
    value: float
    seed: int
    report: MetricsReport = None
    error: str = None


def _run_cell(args):
    raw, axis, value, seed = args
    cfg = apply_axis(ExperimentConfig(raw=raw), axis, value)
    try:
        report, _ = run_experiment(cfg, seed)
        return SweepCell(axis=axis, value=value, seed=seed, report=report)
    except StageError as exc:
        return SweepCell(axis=axis, value=value, seed=seed, error=str(exc))


def sweep(cfg: ExperimentConfig, axis: str, values, seeds, workers: int = None):
    """Repeated runs over axis values x seeds; failed cells carry the error.

    Cell order in the output is deterministic regardless of worker count.
    """
    values = list(values)
    seeds = list(seeds)
    if len(values) < 2:
        raise ConfigError("sweep needs at least 2 axis values")
    if workers is None:
        workers = int(os.environ.get("NSCM_WORKERS", "1"))
    jobs = [(cfg.raw, axis, float(v), int(s)) for v in values for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell, jobs))
    else:
        cells = [_run_cell(j) for j in jobs]
    return cells


def cells_to_csv_rows(cells):
    rows = []
    for cell in cells:
        if cell.report is None:
            continue
        rows.extend(
            cell.report.csv_rows(extra={"axis": cell.axis, "value": cell.value})
        )
    return rows
