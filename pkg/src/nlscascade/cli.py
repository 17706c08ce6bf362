"""Command-line orchestration: config ingestion, experiment subcommands,
manifests, and the big-number parameter calculator.

One JSON document configures everything; each subcommand reads its own
section plus the shared ones (``omega``, ``profile``, ``set``). Unknown keys
are rejected up front so a typo cannot silently fall back to a default.
Every run writes its artifacts plus ``manifest.json`` holding the effective
configuration, its hash, and the library versions — enough to replay the
run byte for byte. Nothing here writes timestamps.

Exit codes: 0 success, 2 configuration, 3 numeric failure, 4 exhausted
search, 5 exhausted precision.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

import mpmath
import numpy as np
from jsonschema import Draft7Validator

from .diophantine import (
    ApproxProfile,
    LogProfile,
    PowerProfile,
    convergents,
    expand_continued_fraction,
    liouville_guard,
    parse_omega,
    select_convergent,
)
from .errors import (
    ConfigError,
    NlsCascadeError,
    NumericError,
    PrecisionExhaustedError,
    ResonantQuartetError,
    SearchError,
    ToleranceUnmetError,
)
from .lambda_set import (
    BaseSet,
    Family,
    build_base_set,
    scale_set,
    unit_square_base,
    verify_properties,
)
from .nls_sim import (
    SparseFourierState,
    _default_reference,
    box_region,
    export_growth_csv,
    export_norm_csv,
    export_shadow_csv,
    export_z_csv,
    growth_diagnostic,
    integrate_nls,
    lift_chain,
    shadowing_experiment,
    shell_region,
)
from .normal_form import (
    build_F,
    default_eta,
    f_is_real,
    homological_residual,
    wbnf_smallness,
)
from .resonance import Mode
from .toy_model import (
    IntegratorConfig,
    ToyState,
    export_toy_csv,
    find_transfer_orbit,
    integrate_toy,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_SEARCH = 4
EXIT_PRECISION = 5

MANIFEST_SCHEMA_VERSION = 1

_NUMBER_OR_FRACTION = {"type": ["number", "string"]}

_TRUNCATION_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["box", "shell"]},
        "half_width": {"type": "integer", "minimum": 1},
        "min_legs": {"type": "integer", "minimum": 0},
        "max_detuning": {"type": ["number", "null"]},
    },
}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "nlscascade experiment configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "omega": {"type": "string"},
        "profile": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["power", "log"]},
                "c": _NUMBER_OR_FRACTION,
                "tau": _NUMBER_OR_FRACTION,
            },
        },
        "set": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_generations": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
                "strategy": {"type": "string"},
                "fixture": {"enum": ["unit_square", "adversarial", None]},
                "scale": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["p", "q"],
                    "properties": {
                        "p": {"type": "integer", "minimum": 1},
                        "q": {"type": "integer", "minimum": 1},
                    },
                },
            },
        },
        "cf": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"depth": {"type": "integer", "minimum": 1}},
        },
        "toy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "n_samples": {"type": "integer", "minimum": 2},
                "initial": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
                "transfer": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "delta": {"type": "number", "exclusiveMinimum": 0},
                        "start": {"type": ["integer", "null"]},
                        "target": {"type": ["integer", "null"]},
                        "threshold": {"type": "number"},
                    },
                },
            },
        },
        "nf": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "smallness_threshold": _NUMBER_OR_FRACTION,
                "check_tolerance": {"type": "number"},
            },
        },
        "nls": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "truncation": _TRUNCATION_SCHEMA,
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "n_samples": {"type": "integer", "minimum": 2},
                "rtol": {"type": "number"},
                "atol": {"type": "number"},
                "initial_modes": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["j", "k", "re"],
                        "properties": {
                            "j": {"type": "integer"},
                            "k": {"type": "integer"},
                            "re": {"type": "number"},
                            "im": {"type": "number"},
                        },
                    },
                },
            },
        },
        "shadow": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ladder": {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 1,
                },
                "t0": {"type": "number", "exclusiveMinimum": 0},
                "samples": {"type": "integer", "minimum": 2},
                "gamma_stride": {"type": "integer", "minimum": 1},
                "z_stride": {"type": "integer", "minimum": 1},
                "truncation": _TRUNCATION_SCHEMA,
                "rtol": {"type": "number"},
                "atol": {"type": "number"},
                "shell_atol": {"type": "number"},
                "conjugate_initial": {"type": "boolean"},
                "disable_nonlinearity": {"type": "boolean"},
            },
        },
        "growth": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "s": {"type": "number", "minimum": 0},
                "source": {"enum": ["toy", "transfer"]},
                "t_end": {"type": ["number", "null"]},
            },
        },
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "C": {"type": ["integer", "string"]},
                "mu": {"type": "number"},
                "s": {"type": "number"},
                "epsilon": {"type": "number"},
                "alpha": {"type": "integer", "minimum": 2},
                "gamma": {"type": ["integer", "null"]},
                "kappa": {"type": "number", "exclusiveMinimum": 0},
                "eta_tilde": _NUMBER_OR_FRACTION,
            },
        },
    },
}


# ---------------------------------------------------------------------------
# big-number parameter calculator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PaperScaleReport:
    """Where the full-strength construction actually lives.

    Everything is carried in logarithmic or exact integer form; the
    underlying magnitudes (the scaling value, the denominator threshold,
    the time horizon) never exist as machine floats.
    """

    n: int
    ln_lambda: int  # exact: the scaling value is exp(ln_lambda)
    log10_lambda: str
    ln_r_bounds: tuple  # exact Fractions, as strings
    ln_q_bounds: tuple  # high-precision decimals, as strings
    log10_q_bounds: tuple
    ln_time_leading: int  # exact: 2 * ln_lambda
    log10_time_bound: str
    growth_target: str
    smoothness: float
    constants: dict
    beta: dict

    def to_json(self) -> str:
        payload = {
            "schema_version": 1,
            "n": self.n,
            "ln_lambda": str(self.ln_lambda),
            "log10_lambda": self.log10_lambda,
            "ln_r_bounds": list(self.ln_r_bounds),
            "ln_q_bounds": list(self.ln_q_bounds),
            "log10_q_bounds": list(self.log10_q_bounds),
            "ln_time_leading": str(self.ln_time_leading),
            "log10_time_bound": self.log10_time_bound,
            "growth_target": self.growth_target,
            "smoothness": self.smoothness,
            "constants": self.constants,
            "beta": self.beta,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _generations_for_growth(C: int, s_frac: Fraction) -> int:
    """Smallest N with 2^((s-1)(N-6)) >= C^2, i.e. 6 + ceil(2 log2 C/(s-1)).

    Exact integer arithmetic when C is a power of two; otherwise a
    high-precision evaluation with a guard that refuses to round a value
    sitting indistinguishably close to an integer.
    """
    if C == 1:
        return 6
    a, b = (s_frac - 1).numerator, (s_frac - 1).denominator
    if C & (C - 1) == 0:  # power of two: everything is exact
        k = C.bit_length() - 1
        return 6 + -(-2 * k * b // a)
    digits = len(str(C))
    with mpmath.workdps(digits + 40):
        x = 2 * mpmath.log(C, 2) / ((s_frac - 1).numerator /
                                    mpmath.mpf((s_frac - 1).denominator))
        nearest = mpmath.nint(x)
        if abs(x - nearest) < mpmath.mpf(10) ** (-25):
            raise PrecisionExhaustedError(
                "the generation count lands too close to an integer to "
                "round reliably; pass a power-of-two growth target"
            )
        return 6 + int(mpmath.ceil(x))


def paper_scale_params(
    C,
    mu: float = 1.0,
    s: float = 2.0,
    profile: Optional[ApproxProfile] = None,
    epsilon: float = 0.1,
    alpha: int = 10,
    gamma: Optional[int] = None,
    kappa: float = 1.0,
    eta_tilde=Fraction(1, 10),
) -> PaperScaleReport:
    """Exact bookkeeping for the out-of-reach parameter regime.

    Given a target growth factor ``C`` for the squared H^s norm, this
    computes the generation count ``N`` that the doubling argument needs,
    the scaling value in log form (``ln lambda = 5**N`` exactly), the
    admissible-denominator threshold implied by the approximation profile,
    and the time horizon — all without ever materializing the magnitudes.

    ``mu`` is the decay exponent of the default profile (``psi(q) =
    q**-(1+mu)``) used when none is passed. The remaining constants are
    free parameters of the underlying estimates; they default to round
    values and are echoed in the report rather than hidden.
    """
    C = int(C)
    if C < 1:
        raise ConfigError("the growth target must be a positive integer")
    if not 0 < mu <= 1:
        raise ConfigError("the profile decay exponent must lie in (0, 1]")
    if s <= 1:
        raise ConfigError(
            "unsupported smoothness range: the doubling argument needs s > 1"
        )
    if epsilon < 0:
        raise ConfigError("epsilon must be nonnegative")
    if alpha < 2:
        raise ConfigError("alpha must be at least 2")
    if kappa <= 0:
        raise ConfigError("kappa must be positive")
    eta_tilde = Fraction(eta_tilde)
    if eta_tilde < 0:
        raise ConfigError("eta_tilde must be nonnegative")
    if profile is None:
        profile = PowerProfile(c=1, tau=Fraction(mu).limit_denominator(10**9))

    s_frac = Fraction(s)
    n = _generations_for_growth(C, s_frac)
    ln_lambda = 5 ** n

    # the normalizing-radius bracket, exact
    ln_r_lo = Fraction(alpha) ** n
    ln_r_hi = 2 * (1 + eta_tilde) * ln_r_lo

    # threshold inequality in log form:
    #   ln(q psi(q)) <= -7 ln N - N ln 72 - 2 (1+eps) ln_lambda - 2 ln R
    eps_frac = Fraction(epsilon)
    digits = len(str(ln_lambda)) + len(str(ln_r_hi.numerator))
    with mpmath.workdps(digits + 40):
        def _mpf(fr: Fraction):
            return mpmath.mpf(fr.numerator) / mpmath.mpf(fr.denominator)

        budget_const = 7 * mpmath.log(n) + n * mpmath.log(72)
        budget_lam = _mpf(2 * (1 + eps_frac) * Fraction(ln_lambda))

        def _ln_q(ln_r: Fraction):
            budget = budget_const + budget_lam + _mpf(2 * ln_r)
            if isinstance(profile, PowerProfile):
                # q psi(q) = c q^-tau  =>  ln q >= (ln c + budget)/tau
                return (mpmath.log(_mpf(profile.c)) + budget) / _mpf(profile.tau)
            if isinstance(profile, LogProfile):
                # q psi(q) = c/ln q  =>  ln q >= c e^budget
                return _mpf(profile.c) * mpmath.exp(budget)
            raise ConfigError("unknown approximation profile")

        ln10 = mpmath.log(10)
        ln_q_lo = _ln_q(ln_r_lo)
        ln_q_hi = _ln_q(ln_r_hi)
        ln_time = 2 * mpmath.mpf(ln_lambda) + mpmath.log(
            kappa * _derived_gamma(gamma, s, profile) * n * n
        )
        report_strings = {
            "log10_lambda": mpmath.nstr(mpmath.mpf(ln_lambda) / ln10, 25),
            "ln_q_lo": mpmath.nstr(ln_q_lo, 25),
            "ln_q_hi": mpmath.nstr(ln_q_hi, 25),
            "log10_q_lo": mpmath.nstr(ln_q_lo / ln10, 25),
            "log10_q_hi": mpmath.nstr(ln_q_hi / ln10, 25),
            "log10_time": mpmath.nstr(ln_time / ln10, 25),
        }

    beta_value = float(2 * math.log(5) / (math.log(2) * (s - 1)))
    return PaperScaleReport(
        n=n,
        ln_lambda=ln_lambda,
        log10_lambda=report_strings["log10_lambda"],
        ln_r_bounds=(str(ln_r_lo), str(ln_r_hi)),
        ln_q_bounds=(report_strings["ln_q_lo"], report_strings["ln_q_hi"]),
        log10_q_bounds=(
            report_strings["log10_q_lo"], report_strings["log10_q_hi"]
        ),
        ln_time_leading=2 * ln_lambda,
        log10_time_bound=report_strings["log10_time"],
        growth_target=str(C),
        smoothness=float(s),
        constants={
            "alpha": alpha,
            "gamma": _derived_gamma(gamma, s, profile),
            "kappa": kappa,
            "eta_tilde": str(eta_tilde),
            "epsilon": epsilon,
            "mu": mu,
            "profile": profile.describe(),
        },
        beta={
            # ln T is dominated by 2*5^N with N affine in log2(C), so the
            # time horizon grows like exp(C^beta) for this beta
            "formula": "2*ln(5)/(ln(2)*(s-1))",
            "value": beta_value,
            "mirror_formula": (
                "same shape with the mirrored smoothness range; the "
                "underlying exponent is not explicit, so only the "
                "dependence is reported"
            ),
        },
    )


def _derived_gamma(gamma: Optional[int], s: float, profile) -> int:
    """Smallest integer with 2*gamma*sigma > s unless overridden; sigma is
    the profile's decay strength."""
    if gamma is not None:
        if gamma < 1:
            raise ConfigError("gamma must be a positive integer")
        return gamma
    sigma = float(profile.tau) if isinstance(profile, PowerProfile) else 1.0
    return int(math.floor(s / (2.0 * sigma))) + 1


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------


def load_config(path: Optional[str]) -> dict:
    """Read and schema-validate the single JSON config document."""
    if path is None:
        cfg = {}
    else:
        try:
            with open(path) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    errors = sorted(
        Draft7Validator(CONFIG_SCHEMA).iter_errors(cfg),
        key=lambda e: list(e.absolute_path),
    )
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.absolute_path) or "<root>"
        raise ConfigError(f"config rejected at {where}: {first.message}")


def _fraction(value) -> Fraction:
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a valid rational: {value!r}") from exc


def _profile_from(cfg: dict) -> Optional[ApproxProfile]:
    section = cfg.get("profile")
    if section is None:
        return None
    if section["kind"] == "power":
        return PowerProfile(
            c=_fraction(section.get("c", 1)),
            tau=_fraction(section.get("tau", 1)),
        )
    return LogProfile(c=_fraction(section.get("c", 1)))


def _adversarial_base() -> BaseSet:
    """The unit square with one extra second-generation mode adjoined; the
    combination scan must reject it with a witness."""
    g1 = [Mode(0, 0), Mode(1, 1)]
    g2 = [Mode(1, 0), Mode(0, 1), Mode(2, 1)]
    fam = Family(parents=(g1[0], g1[1]), children=(g2[0], g2[1]), gen=0)
    return BaseSet(generations=[g1, g2], families=[fam])


def _set_from(cfg: dict):
    section = cfg.get("set", {})
    scale = section.get("scale", {"p": 17, "q": 12})
    fixture = section.get("fixture")
    if fixture == "unit_square":
        base = unit_square_base()
    elif fixture == "adversarial":
        base = _adversarial_base()
    else:
        base = build_base_set(
            section.get("n_generations", 3),
            strategy=section.get("strategy", "generic"),
            seed=section.get("seed", 0),
        )
    return scale_set(base, scale["p"], scale["q"])


def _omega_from(cfg: dict):
    return parse_omega(cfg.get("omega", "sqrt:2"))


def _region_from(truncation: Optional[dict], lset, omega):
    if truncation is None:
        truncation = {"kind": "shell", "max_detuning": 1e4}
    if truncation["kind"] == "box":
        return box_region(lset, omega, truncation.get("half_width"))
    return shell_region(
        lset,
        omega,
        min_legs=truncation.get("min_legs", 2),
        max_detuning=truncation.get("max_detuning", 1e4),
    )


def _write_json(path: Path, text: str) -> None:
    path.write_text(text if text.endswith("\n") else text + "\n")


def _json_fallback(value):
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"not JSON-serializable: {type(value).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_fallback)


def write_manifest(outdir: Path, command: str, cfg: dict, artifacts: list,
                   seeds: dict) -> Path:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canonical.encode()).hexdigest()
    from importlib.metadata import version as _dist_version

    import matplotlib
    import scipy

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "command": command,
        "config": cfg,
        "config_sha256": digest,
        "artifacts": sorted(artifacts),
        "seeds": seeds,
        "versions": {
            "nlscascade": _package_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "mpmath": mpmath.__version__,
            "matplotlib": matplotlib.__version__,
            "jsonschema": _dist_version("jsonschema"),
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
        "env": {
            "outdir_override": os.environ.get("NLSCASCADE_OUTDIR"),
            "threads_override": os.environ.get("NLSCASCADE_THREADS"),
        },
    }
    path = outdir / "manifest.json"
    _write_json(path, _dump(manifest))
    return path


def _package_version() -> str:
    from . import __version__

    return __version__


# ---------------------------------------------------------------------------
# subcommand handlers: each returns (exit_code, artifact names)
# ---------------------------------------------------------------------------


def cmd_cf(cfg: dict, outdir: Path, no_plot: bool):
    omega = _omega_from(cfg)
    depth = cfg.get("cf", {}).get("depth", 20)
    expansion = expand_continued_fraction(omega, depth)
    convs = convergents(omega, depth)
    guard = liouville_guard(omega, min(depth, len(expansion.quotients)))

    csv_path = outdir / "convergents.csv"
    with open(csv_path, "w") as fh:
        fh.write("index,quotient,p,q,abs_error_lo,abs_error_hi\n")
        for c in convs:
            quot = expansion.quotients[c.index]
            lo = hi = ""
            if c.abs_error_bounds is not None:
                lo = repr(float(c.abs_error_bounds.lo))
                hi = repr(float(c.abs_error_bounds.hi))
            fh.write(f"{c.index},{quot},{c.p},{c.q},{lo},{hi}\n")

    report = {
        "omega": cfg.get("omega", "sqrt:2"),
        "depth": depth,
        "quotients": list(expansion.quotients),
        "terminated": expansion.terminated,
        "guard": {
            "passed": guard.passed,
            "depth": guard.depth,
            "q_min": guard.q_min,
            "witness": guard.witness,
        },
    }
    profile = _profile_from(cfg)
    if profile is not None:
        chosen = select_convergent(omega, profile)
        report["selected_convergent"] = {"p": chosen.p, "q": chosen.q,
                                         "index": chosen.index}
    _write_json(outdir / "cf_report.json", _dump(report))
    return EXIT_OK, ["convergents.csv", "cf_report.json"]


def _property_report_payload(report) -> dict:
    out = {}
    for name in ("p1_closure", "p2_p3_structure", "p4_sibling_spouse",
                 "p5_faithful", "p6_combinations"):
        check = getattr(report, name)
        entry = {"passed": bool(check.passed)}
        if getattr(check, "counterexample", None) is not None:
            entry["counterexample"] = [
                [int(m[0]), int(m[1])] for m in check.counterexample
            ]
        out[name] = entry
    out["checks_used"] = report.checks_used
    out["all_passed"] = report.all_passed()
    return out


def _write_modes_csv(lset, path: Path) -> None:
    with open(path, "w") as fh:
        fh.write("generation,j,k\n")
        for g, gen in enumerate(lset.generations):
            for m in gen:
                fh.write(f"{g + 1},{m[0]},{m[1]}\n")


def cmd_lambda(action: str, cfg: dict, outdir: Path, no_plot: bool):
    lset = _set_from(cfg)
    artifacts = []
    if action in ("build", "scale"):
        _write_modes_csv(lset, outdir / "modes.csv")
        artifacts.append("modes.csv")
        report = {
            "n_generations": lset.N,
            "generation_sizes": [len(g) for g in lset.generations],
            "n_families": len(lset.families),
            "scale": {"p": lset.p, "q": lset.q},
        }
        _write_json(outdir / "set_report.json", _dump(report))
        artifacts.append("set_report.json")
        if not no_plot:
            from . import plots

            plots.save_mode_scatter(lset, outdir / "modes.png")
            artifacts.append("modes.png")
        return EXIT_OK, artifacts

    # verify
    report = verify_properties(lset)
    payload = _property_report_payload(report)
    payload["scale"] = {"p": lset.p, "q": lset.q}
    _write_json(outdir / "verify_report.json", _dump(payload))
    artifacts.append("verify_report.json")
    code = EXIT_OK if report.all_passed() else EXIT_NUMERIC
    return code, artifacts


def _toy_initial(cfg: dict, n: int) -> np.ndarray:
    section = cfg.get("toy", {})
    if "initial" in section:
        pairs = section["initial"]
        if len(pairs) != n:
            raise ConfigError(
                f"initial chain state has {len(pairs)} entries, set has {n}"
            )
        return np.array([complex(re, im) for re, im in pairs])
    return _default_reference(n)


def cmd_toy(action: str, cfg: dict, outdir: Path, no_plot: bool):
    lset = _set_from(cfg)
    section = cfg.get("toy", {})
    artifacts = []
    if action == "run":
        b0 = _toy_initial(cfg, lset.N)
        traj = integrate_toy(
            ToyState(b0), section.get("t_end", 10.0),
            n_samples=section.get("n_samples", 201),
        )
        export_toy_csv(traj, outdir / "chain.csv")
        artifacts.append("chain.csv")
        report = {
            "t_end": traj.t_span[1],
            "mass_drift": traj.mass_drift,
            "energy_drift": traj.energy_drift,
        }
        _write_json(outdir / "chain_report.json", _dump(report))
        artifacts.append("chain_report.json")
        if not no_plot:
            from . import plots

            plots.save_toy_masses(traj, outdir / "chain.png")
            artifacts.append("chain.png")
        return EXIT_OK, artifacts

    # transfer
    tr = section.get("transfer", {})
    state, t_peak, diag = find_transfer_orbit(
        lset.N,
        tr.get("delta", 1e-2),
        start=tr.get("start"),
        target=tr.get("target"),
        threshold=tr.get("threshold", 0.7),
    )
    traj = integrate_toy(state, max(t_peak, 1e-9))
    export_toy_csv(traj, outdir / "transfer.csv")
    artifacts.append("transfer.csv")
    report = {
        "transfer_time": t_peak,
        "diagnostics": diag,
        "initial": [[float(v.real), float(v.imag)] for v in state.b],
    }
    _write_json(outdir / "transfer_report.json", _dump(report))
    artifacts.append("transfer_report.json")
    if not no_plot:
        from . import plots

        plots.save_toy_masses(traj, outdir / "transfer.png")
        artifacts.append("transfer.png")
    return EXIT_OK, artifacts


def cmd_nf(action: str, cfg: dict, outdir: Path, no_plot: bool):
    lset = _set_from(cfg)
    omega = _omega_from(cfg)
    section = cfg.get("nf", {})
    profile = _profile_from(cfg)
    kwargs = {}
    if "smallness_threshold" in section:
        kwargs["smallness_threshold"] = _fraction(
            section["smallness_threshold"]
        )
    F = build_F(lset, omega, profile=profile, **kwargs)
    artifacts = []

    if action == "build":
        with open(outdir / "generating_terms.csv", "w") as fh:
            fh.write("j1,k1,j2,k2,j3,k3,j4,k4,multiplicity,"
                     "detuning,coeff_re,coeff_im\n")
            for term in F.terms:
                cells = []
                for m in term.quartet:
                    cells += [str(m[0]), str(m[1])]
                cells.append(str(term.multiplicity))
                cells.append(repr(float(term.omega_value)))
                cells.append(repr(float(term.coefficient.real)))
                cells.append(repr(float(term.coefficient.imag)))
                fh.write(",".join(cells) + "\n")
        artifacts.append("generating_terms.csv")
        report = {
            "n_terms": len(F.terms),
            "support_size": len(F.support),
            "l1_floor": F.l1_floor,
            "is_real": f_is_real(F, tol=1e-12),
            "default_eta": default_eta(F),
        }
        if profile is not None:
            report["smallness"] = wbnf_smallness(lset, profile)
        _write_json(outdir / "generating_report.json", _dump(report))
        artifacts.append("generating_report.json")
        return EXIT_OK, artifacts

    # check
    tol = section.get("check_tolerance", 1e-13)
    residual = homological_residual(F, lset, omega)
    passed = residual <= tol
    report = {"residual": residual, "tolerance": tol, "passed": passed}
    _write_json(outdir / "residual_report.json", _dump(report))
    artifacts.append("residual_report.json")
    if not passed:
        raise ToleranceUnmetError(
            f"normal-form residual {residual:.3e} exceeds {tol:.3e}"
        )
    return EXIT_OK, artifacts


def cmd_nls_run(cfg: dict, outdir: Path, no_plot: bool):
    lset = _set_from(cfg)
    omega = _omega_from(cfg)
    section = cfg.get("nls", {})
    region = _region_from(section.get("truncation"), lset, omega)
    if "initial_modes" in section:
        amps = {
            (entry["j"], entry["k"]): complex(entry["re"],
                                              entry.get("im", 0.0))
            for entry in section["initial_modes"]
        }
    else:
        amps = {
            m: v / 2.0
            for m, v in lift_chain(lset, _default_reference(lset.N)).items()
        }
    state = SparseFourierState(amps, omega=omega)
    config = IntegratorConfig(
        rtol=section.get("rtol", 1e-9), atol=section.get("atol", 1e-11)
    )
    traj = integrate_nls(
        state, section.get("t_end", 1.0), region,
        config=config, n_samples=section.get("n_samples", 129),
    )
    export_norm_csv(traj, outdir / "norms.csv")
    artifacts = ["norms.csv"]
    report = {
        "region": region.descriptor,
        "t_end": traj.t_span[1],
        "mass_drift": traj.mass_drift,
        "energy_drift": traj.energy_drift,
        "momentum_drift": traj.momentum_drift,
        "n_evals": traj.n_evals,
    }
    _write_json(outdir / "run_report.json", _dump(report))
    artifacts.append("run_report.json")
    if not no_plot:
        from . import plots

        ell1 = np.abs(traj.values).sum(axis=1)
        mass = (np.abs(traj.values) ** 2).sum(axis=1)
        plots.save_norm_history(
            traj.times, {"l1": ell1, "mass": mass},
            outdir / "norms.png", f"truncated run on {region.descriptor}",
        )
        artifacts.append("norms.png")
    return EXIT_OK, artifacts


def cmd_shadow(cfg: dict, outdir: Path, no_plot: bool):
    lset = _set_from(cfg)
    omega = _omega_from(cfg)
    section = cfg.get("shadow", {})
    truncation = section.get("truncation", {"kind": "shell",
                                            "max_detuning": 1e4})
    if truncation["kind"] != "shell":
        raise ConfigError(
            "shadowing runs need a shell truncation: the gap is measured "
            "around the tracked set, which a plain box does not carry"
        )
    region = _region_from(truncation, lset, omega)
    config = IntegratorConfig(
        rtol=section.get("rtol", 1e-9), atol=section.get("atol", 1e-11)
    )
    report = shadowing_experiment(
        lset,
        omega,
        section.get("ladder", [4.0, 8.0, 16.0]),
        region=region,
        config=config,
        t0=section.get("t0", 0.01),
        samples=section.get("samples", 1024),
        gamma_stride=section.get("gamma_stride", 4),
        z_stride=section.get("z_stride", 16),
        shell_atol=section.get("shell_atol", 1e-12),
        conjugate_initial=section.get("conjugate_initial", True),
        disable_nonlinearity=section.get("disable_nonlinearity", False),
    )
    export_shadow_csv(report, outdir / "ladder.csv")
    export_z_csv(report, outdir / "defects.csv")
    _write_json(outdir / "shadow_report.json", report.to_json())
    artifacts = ["ladder.csv", "defects.csv", "shadow_report.json"]
    if not no_plot:
        from . import plots

        plots.save_shadow_ladder(report, outdir / "ladder.png")
        artifacts.append("ladder.png")
        if any(e.z_times is not None for e in report.entries):
            plots.save_z_series(report, outdir / "defects.png")
            artifacts.append("defects.png")
    return EXIT_OK, artifacts


def cmd_growth(cfg: dict, outdir: Path, no_plot: bool):
    lset = _set_from(cfg)
    section = cfg.get("growth", {})
    source = section.get("source", "transfer")
    if source == "transfer":
        tr = cfg.get("toy", {}).get("transfer", {})
        state, t_peak, _ = find_transfer_orbit(
            lset.N,
            tr.get("delta", 1e-2),
            start=tr.get("start"),
            target=tr.get("target"),
            threshold=tr.get("threshold", 0.7),
        )
        t_end = section.get("t_end") or max(t_peak, 1e-9)
        traj = integrate_toy(state, t_end)
    else:
        b0 = _toy_initial(cfg, lset.N)
        t_end = section.get("t_end") or 10.0
        traj = integrate_toy(ToyState(b0), t_end)
    report = growth_diagnostic(traj, lset, section.get("s", 2.0))
    export_growth_csv(report, outdir / "growth.csv")
    _write_json(outdir / "growth_report.json", report.to_json())
    artifacts = ["growth.csv", "growth_report.json"]
    if not no_plot:
        from . import plots

        plots.save_growth(report, outdir / "growth.png")
        artifacts.append("growth.png")
    return EXIT_OK, artifacts


def cmd_params(cfg: dict, outdir: Path, no_plot: bool):
    section = cfg.get("params", {})
    report = paper_scale_params(
        section.get("C", 10**6),
        mu=section.get("mu", 1.0),
        s=section.get("s", 2.0),
        profile=_profile_from(cfg),
        epsilon=section.get("epsilon", 0.1),
        alpha=section.get("alpha", 10),
        gamma=section.get("gamma"),
        kappa=section.get("kappa", 1.0),
        eta_tilde=_fraction(section.get("eta_tilde", "1/10")),
    )
    _write_json(outdir / "params_report.json", report.to_json())
    return EXIT_OK, ["params_report.json"]


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _apply_thread_override() -> None:
    """Best-effort thread cap; BLAS backends read these on first use."""
    threads = os.environ.get("NLSCASCADE_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlscascade",
        description="desk-scale experiments around a sparse cascade "
                    "construction",
    )
    parser.add_argument("--config", help="JSON configuration document")
    parser.add_argument("--out", help="output directory (default: "
                                      "$NLSCASCADE_OUTDIR or ./out)")
    parser.add_argument("--no-plot", action="store_true",
                        help="skip the PNG figures, write CSV/JSON only")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("cf", help="continued-fraction expansion and convergents")
    p_lambda = sub.add_parser("lambda", help="mode-set construction")
    p_lambda.add_argument("action", choices=["build", "verify", "scale"])
    p_toy = sub.add_parser("toy", help="chain model runs")
    p_toy.add_argument("action", choices=["run", "transfer"])
    p_nf = sub.add_parser("nf", help="normalizing map construction/check")
    p_nf.add_argument("action", choices=["build", "check"])
    p_nls = sub.add_parser("nls", help="truncated field runs")
    p_nls.add_argument("action", choices=["run"])
    sub.add_parser("shadow", help="scaling-ladder shadowing experiment")
    sub.add_parser("growth", help="norm growth diagnostics along an orbit")
    sub.add_parser("params", help="big-number parameter calculator")
    return parser


def _dispatch(args, cfg: dict, outdir: Path):
    command = args.command
    no_plot = args.no_plot
    if command == "cf":
        return "cf", cmd_cf(cfg, outdir, no_plot)
    if command == "lambda":
        return f"lambda {args.action}", cmd_lambda(args.action, cfg, outdir,
                                                   no_plot)
    if command == "toy":
        return f"toy {args.action}", cmd_toy(args.action, cfg, outdir,
                                             no_plot)
    if command == "nf":
        return f"nf {args.action}", cmd_nf(args.action, cfg, outdir, no_plot)
    if command == "nls":
        return "nls run", cmd_nls_run(cfg, outdir, no_plot)
    if command == "shadow":
        return "shadow", cmd_shadow(cfg, outdir, no_plot)
    if command == "growth":
        return "growth", cmd_growth(cfg, outdir, no_plot)
    if command == "params":
        return "params", cmd_params(cfg, outdir, no_plot)
    raise ConfigError(f"unknown command {command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _apply_thread_override()
    try:
        cfg = load_config(args.config)
        outdir = Path(
            args.out or os.environ.get("NLSCASCADE_OUTDIR") or "out"
        )
        outdir.mkdir(parents=True, exist_ok=True)
        name, (code, artifacts) = _dispatch(args, cfg, outdir)
        seeds = {"set_seed": cfg.get("set", {}).get("seed", 0)}
        write_manifest(outdir, name, cfg, artifacts, seeds)
        print(f"{name}: wrote {len(artifacts)} artifact(s) to {outdir}")
        return code
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ResonantQuartetError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SearchError as exc:
        print(f"search failed: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    except PrecisionExhaustedError as exc:
        print(f"precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except NlsCascadeError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
