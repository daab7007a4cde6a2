"""Experiment configuration: a single INI-style file with named sections.

Sections and keys (floats are always serialized with 17 significant digits
so that a parse -> serialize -> parse round trip is the identity):

[kernel]      family = polynomial | exponential | tabulated | zero
              a, q (polynomial); a, lam (exponential); table = CSV path
[xi]          mode = auto | constant  (auto derives the closed-form pair
              from a polynomial kernel); value, p for constant
[operators]   generator = laplacian_1d | explicit; modes, length,
              b_choice = same | identity | explicit;
              a_eigenvalues, b_eigenvalues as comma lists for explicit
[history]     family = constant | exponential | bump; coefficients
              (comma list or single value broadcast over modes); mu, tau;
              velocities (comma list or single value)
[simulation]  dt, T
[energy]      M, alpha0 for the diagnostic functional I3
[bounds]      families (comma list of case1_basic, case1_improved,
              case2_basic, case2_improved, prior_case1, prior_case2),
              fit_window = lo, hi; case2_window = lo, hi;
              enforce_case2_condition = true | false
[output]      directory
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace

import numpy as np

from . import history as hist
from . import kernels, operators
from .simulator import SimConfig


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


ALL_BOUND_FAMILIES = (
    "case1_basic", "case1_improved", "case2_basic", "case2_improved",
    "prior_case1", "prior_case2",
)


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _fmt_list(xs) -> str:
    return ", ".join(_fmt(x) for x in xs)


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


@dataclass(frozen=True)
class ExperimentConfig:
    kernel_family: str = "polynomial"
    kernel_a: float = 1.0
    kernel_q: float = 3.0
    kernel_lam: float = 1.0
    kernel_table: str = ""

    xi_mode: str = "auto"
    xi_value: float = 1.0
    xi_p: float = 1.25

    op_generator: str = "laplacian_1d"
    op_modes: int = 1
    op_length: float = 1.0
    op_b_choice: str = "same"
    op_a_eigs: tuple = ()
    op_b_eigs: tuple = ()

    hist_family: str = "constant"
    hist_coeffs: tuple = (1.0,)
    hist_mu: float = 1.0
    hist_tau: float = 1.0
    hist_u1: tuple = (0.0,)

    dt: float = 0.01
    horizon: float = 10.0

    m_const: float = 10.0
    alpha0: float = 1.0

    # case2_improved is opt-in: its integrability gate rejects most
    # polynomial configurations unless explicitly disabled
    bound_families: tuple = ("case1_basic", "case1_improved", "case2_basic",
                             "prior_case1", "prior_case2")
    fit_window: tuple = (0.0, 0.0)      # (0, 0) means the trailing log-quarter
    case2_window: tuple = (1.0, 0.0)    # hi = 0 means the full horizon
    enforce_case2_condition: bool = True

    out_dir: str = "out"

    # ---- builders ---------------------------------------------------------

    def build_kernel(self):
        fam = self.kernel_family
        if fam == "polynomial":
            return kernels.make_polynomial_kernel(self.kernel_a, self.kernel_q)
        if fam == "exponential":
            return kernels.make_exponential_kernel(self.kernel_a, self.kernel_lam)
        if fam == "zero":
            return kernels.make_exponential_kernel(0.0, 1.0)
        if fam == "tabulated":
            if not self.kernel_table:
                raise ConfigError("tabulated kernel needs a table path")
            return kernels.load_kernel_table(self.kernel_table)
        raise ConfigError(f"unknown kernel family {fam!r}")

    def build_xi(self, kernel):
        if self.xi_mode == "auto":
            xi, _ = kernels.admissible_xi_p(kernel)
            return xi
        if self.xi_mode == "constant":
            return kernels.constant_xi(self.xi_value, self.xi_p)
        raise ConfigError(f"unknown xi mode {self.xi_mode!r}")

    def build_pair(self):
        if self.op_generator == "laplacian_1d":
            a = operators.laplacian_1d(self.op_modes, self.op_length)
            return operators.modal_pair(a, b_choice=self.op_b_choice,
                                        b_eigs=self.op_b_eigs or None)
        if self.op_generator == "explicit":
            if not self.op_a_eigs:
                raise ConfigError("explicit operators need a_eigenvalues")
            return operators.modal_pair(np.asarray(self.op_a_eigs),
                                        b_choice=self.op_b_choice,
                                        b_eigs=np.asarray(self.op_b_eigs) if self.op_b_eigs else None)
        raise ConfigError(f"unknown operator generator {self.op_generator!r}")

    def build_history(self, n_modes: int):
        coeffs = np.asarray(self.hist_coeffs, dtype=float)
        if coeffs.size == 1 and n_modes > 1:
            coeffs = np.full(n_modes, coeffs[0])
        if coeffs.size != n_modes:
            raise ConfigError(
                f"history has {coeffs.size} coefficients but the pair has {n_modes} modes"
            )
        u1 = np.asarray(self.hist_u1, dtype=float)
        if u1.size == 1 and n_modes > 1:
            u1 = np.full(n_modes, u1[0])
        fam = self.hist_family
        if fam == "constant":
            return hist.constant_history(coeffs, u1)
        if fam == "exponential":
            return hist.exponential_history(coeffs, self.hist_mu, u1)
        if fam == "bump":
            return hist.bump_history(coeffs, self.hist_tau, u1)
        raise ConfigError(f"unknown history family {fam!r}")

    def build_sim(self) -> SimConfig:
        kernel = self.build_kernel()
        pair = self.build_pair()
        history = self.build_history(pair.n_modes)
        xi = None
        if self.kernel_family != "zero":
            try:
                xi = self.build_xi(kernel)
            except kernels.AdmissibilityError:
                xi = None
        return SimConfig(dt=self.dt, horizon=self.horizon, kernel=kernel,
                         pair=pair, history=history, xi=xi)

    def effective_windows(self) -> tuple[tuple, tuple]:
        lo, hi = self.fit_window
        if hi <= 0.0:
            lo = (1.0 + self.horizon) ** 0.75 - 1.0 if lo <= 0.0 else lo
            hi = self.horizon
        c_lo, c_hi = self.case2_window
        if c_hi <= 0.0:
            c_hi = self.horizon
        return (lo, hi), (c_lo, c_hi)

    def validate(self):
        """Cross-field validation; raises ConfigError on the first failure."""
        try:
            sim = self.build_sim()
            sim.validate()
        except (ValueError, OSError) as exc:
            raise ConfigError(str(exc)) from exc
        for fam in self.bound_families:
            if fam not in ALL_BOUND_FAMILIES:
                raise ConfigError(f"unknown bound family {fam!r}")
        if self.kernel_family != "zero":
            if self.xi_mode == "constant" and not (1.0 <= self.xi_p < 1.5):
                raise ConfigError(f"xi exponent p = {self.xi_p} outside [1, 3/2)")
        (lo, hi), (c_lo, c_hi) = self.effective_windows()
        if not (0.0 <= lo < hi <= self.horizon):
            raise ConfigError(f"fit window [{lo}, {hi}] not inside [0, T]")
        if not (0.0 < c_lo < c_hi <= self.horizon):
            raise ConfigError(f"case-2 window [{c_lo}, {c_hi}] not inside (0, T]")
        return sim


# ---- INI serialization -----------------------------------------------------

def to_ini(cfg: ExperimentConfig) -> str:
    cp = configparser.ConfigParser()
    cp["kernel"] = {"family": cfg.kernel_family}
    if cfg.kernel_family == "polynomial":
        cp["kernel"]["a"] = _fmt(cfg.kernel_a)
        cp["kernel"]["q"] = _fmt(cfg.kernel_q)
    elif cfg.kernel_family == "exponential":
        cp["kernel"]["a"] = _fmt(cfg.kernel_a)
        cp["kernel"]["lam"] = _fmt(cfg.kernel_lam)
    elif cfg.kernel_family == "tabulated":
        cp["kernel"]["table"] = cfg.kernel_table

    cp["xi"] = {"mode": cfg.xi_mode}
    if cfg.xi_mode == "constant":
        cp["xi"]["value"] = _fmt(cfg.xi_value)
        cp["xi"]["p"] = _fmt(cfg.xi_p)

    cp["operators"] = {"generator": cfg.op_generator, "b_choice": cfg.op_b_choice}
    if cfg.op_generator == "laplacian_1d":
        cp["operators"]["modes"] = str(cfg.op_modes)
        cp["operators"]["length"] = _fmt(cfg.op_length)
    else:
        cp["operators"]["a_eigenvalues"] = _fmt_list(cfg.op_a_eigs)
    if cfg.op_b_choice == "explicit":
        cp["operators"]["b_eigenvalues"] = _fmt_list(cfg.op_b_eigs)

    cp["history"] = {
        "family": cfg.hist_family,
        "coefficients": _fmt_list(cfg.hist_coeffs),
        "velocities": _fmt_list(cfg.hist_u1),
    }
    if cfg.hist_family == "exponential":
        cp["history"]["mu"] = _fmt(cfg.hist_mu)
    if cfg.hist_family == "bump":
        cp["history"]["tau"] = _fmt(cfg.hist_tau)

    cp["simulation"] = {"dt": _fmt(cfg.dt), "t": _fmt(cfg.horizon)}
    cp["energy"] = {"m": _fmt(cfg.m_const), "alpha0": _fmt(cfg.alpha0)}
    cp["bounds"] = {
        "families": ", ".join(cfg.bound_families),
        "fit_window": _fmt_list(cfg.fit_window),
        "case2_window": _fmt_list(cfg.case2_window),
        "enforce_case2_condition": str(cfg.enforce_case2_condition).lower(),
    }
    cp["output"] = {"directory": cfg.out_dir}

    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def from_ini(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    def get(section, key, default=None):
        if cp.has_option(section, key):
            return cp.get(section, key)
        if default is None:
            raise ConfigError(f"missing [{section}] {key}")
        return default

    cfg = ExperimentConfig()
    fam = get("kernel", "family")
    kwargs = {"kernel_family": fam}
    if fam == "polynomial":
        kwargs["kernel_a"] = float(get("kernel", "a"))
        kwargs["kernel_q"] = float(get("kernel", "q"))
    elif fam == "exponential":
        kwargs["kernel_a"] = float(get("kernel", "a"))
        kwargs["kernel_lam"] = float(get("kernel", "lam"))
    elif fam == "tabulated":
        kwargs["kernel_table"] = get("kernel", "table")
    elif fam != "zero":
        raise ConfigError(f"unknown kernel family {fam!r}")

    mode = get("xi", "mode", "auto")
    kwargs["xi_mode"] = mode
    if mode == "constant":
        kwargs["xi_value"] = float(get("xi", "value"))
        kwargs["xi_p"] = float(get("xi", "p"))

    gen = get("operators", "generator", "laplacian_1d")
    kwargs["op_generator"] = gen
    kwargs["op_b_choice"] = get("operators", "b_choice", "same")
    if gen == "laplacian_1d":
        kwargs["op_modes"] = int(get("operators", "modes"))
        kwargs["op_length"] = float(get("operators", "length", "1"))
    else:
        kwargs["op_a_eigs"] = _parse_floats(get("operators", "a_eigenvalues"))
    if kwargs["op_b_choice"] == "explicit":
        kwargs["op_b_eigs"] = _parse_floats(get("operators", "b_eigenvalues"))

    hfam = get("history", "family")
    kwargs["hist_family"] = hfam
    kwargs["hist_coeffs"] = _parse_floats(get("history", "coefficients"))
    kwargs["hist_u1"] = _parse_floats(get("history", "velocities", "0"))
    if hfam == "exponential":
        kwargs["hist_mu"] = float(get("history", "mu"))
    if hfam == "bump":
        kwargs["hist_tau"] = float(get("history", "tau"))

    kwargs["dt"] = float(get("simulation", "dt"))
    kwargs["horizon"] = float(get("simulation", "t"))
    kwargs["m_const"] = float(get("energy", "m", "10"))
    kwargs["alpha0"] = float(get("energy", "alpha0", "1"))

    if cp.has_section("bounds"):
        fams = get("bounds", "families", ", ".join(ALL_BOUND_FAMILIES))
        kwargs["bound_families"] = tuple(tok.strip() for tok in fams.split(",") if tok.strip())
        kwargs["fit_window"] = _parse_floats(get("bounds", "fit_window", "0, 0"))
        kwargs["case2_window"] = _parse_floats(get("bounds", "case2_window", "1, 0"))
        kwargs["enforce_case2_condition"] = get(
            "bounds", "enforce_case2_condition", "true").strip().lower() == "true"
    kwargs["out_dir"] = get("output", "directory", "out")
    return replace(cfg, **kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return from_ini(fh.read())


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as fh:
        fh.write(to_ini(cfg))


# ---- presets ---------------------------------------------------------------

def preset(name: str) -> ExperimentConfig:
    """Bundled, ready-to-run experiment configurations."""
    if name == "paper-example-q3":
        # polynomial kernel with q = 3 and unit amplitude: total mass 1/2,
        # strictly below 1/a0 = 1 for B = A; sixteen Laplacian modes with
        # smooth (k^-3) history amplitudes so the energy sits in the low modes
        coeffs = tuple(1.0 / k**3 for k in range(1, 17))
        return ExperimentConfig(
            kernel_family="polynomial", kernel_a=1.0, kernel_q=3.0,
            xi_mode="auto",
            op_generator="laplacian_1d", op_modes=16, op_length=1.0, op_b_choice="same",
            hist_family="constant", hist_coeffs=coeffs, hist_u1=(0.0,),
            dt=0.02, horizon=200.0,
            bound_families=ALL_BOUND_FAMILIES,
            fit_window=(50.0, 200.0), case2_window=(1.0, 200.0),
            enforce_case2_condition=False,
            out_dir="out",
        )
    if name == "zero-history":
        return ExperimentConfig(
            kernel_family="polynomial", kernel_a=1.0, kernel_q=3.0,
            xi_mode="auto",
            op_generator="laplacian_1d", op_modes=4, op_length=1.0, op_b_choice="same",
            hist_family="constant", hist_coeffs=(0.0,), hist_u1=(0.0,),
            dt=0.05, horizon=10.0,
            bound_families=("case1_basic", "case1_improved"),
            fit_window=(1.0, 10.0), case2_window=(1.0, 10.0),
            out_dir="out",
        )
    if name == "exponential-oracle":
        return ExperimentConfig(
            kernel_family="exponential", kernel_a=0.5, kernel_lam=1.0,
            xi_mode="constant", xi_value=1.0, xi_p=1.25,
            op_generator="explicit", op_a_eigs=(4.0,), op_b_choice="explicit",
            op_b_eigs=(1.0,),
            hist_family="exponential", hist_coeffs=(1.0,), hist_mu=1.0, hist_u1=(0.0,),
            dt=0.004, horizon=40.0,
            bound_families=(),
            fit_window=(10.0, 40.0), case2_window=(1.0, 40.0),
            out_dir="out",
        )
    raise ConfigError(f"unknown preset {name!r}")


PRESET_NAMES = ("paper-example-q3", "zero-history", "exponential-oracle")
