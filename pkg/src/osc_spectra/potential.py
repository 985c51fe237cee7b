"""Perturbations b(x): descriptors, V-norm profiles and decay-rate fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AccuracyError, ConfigurationError, DomainError
from .hermite import default_grid, hermite_table

KINDS = ("analytic-formula", "piecewise-constant", "indicator", "power-weight", "block-operator")
FORMULAS = ("constant", "gaussian", "polynomial", "sum", "custom")


def as_complex(value):
    """Accept a number, a [re, im] pair or {"re":..,"im":..}."""
    if isinstance(value, dict):
        return complex(value.get("re", 0.0), value.get("im", 0.0))
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigurationError(f"complex value needs [re, im], got {value!r}")
        return complex(value[0], value[1])
    return complex(value)


def _plain(c):
    c = complex(c)
    return c.real if c.imag == 0 else [c.real, c.imag]


@dataclass(frozen=True)
class Potential:
    """A perturbation b(x), or an l2-block perturbation with no pointwise values."""

    kind: str
    params: dict = field(default_factory=dict)
    scale: complex = 1.0
    func: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown potential kind {self.kind!r}")

    # constructors ---------------------------------------------------------
    @classmethod
    def zero(cls):
        return cls.constant(0.0)

    @classmethod
    def constant(cls, c):
        return cls("analytic-formula", {"name": "constant", "value": as_complex(c)})

    @classmethod
    def gaussian(cls, amplitude=1.0, width=1.0, center=0.0):
        """amplitude * exp(-((x - center)/width)^2)"""
        if width <= 0:
            raise ConfigurationError("gaussian width must be positive")
        return cls(
            "analytic-formula",
            {"name": "gaussian", "amplitude": as_complex(amplitude), "width": float(width), "center": float(center)},
        )

    @classmethod
    def polynomial(cls, coefficients):
        """sum_i c_i x^i"""
        return cls("analytic-formula", {"name": "polynomial", "coefficients": tuple(as_complex(c) for c in coefficients)})

    @classmethod
    def formula(cls, func, smooth=True, label="custom"):
        return cls("analytic-formula", {"name": "custom", "label": label, "smooth": smooth}, func=func)

    @classmethod
    def indicator(cls, lo=-1.0, hi=1.0, value=1.0):
        if not hi > lo:
            raise ConfigurationError(f"indicator needs lo < hi, got [{lo}, {hi}]")
        return cls("indicator", {"lo": float(lo), "hi": float(hi), "value": as_complex(value)})

    @classmethod
    def piecewise_constant(cls, breaks, values):
        """values[i] on [breaks[i], breaks[i+1]); zero outside [breaks[0], breaks[-1])."""
        breaks = tuple(float(b) for b in breaks)
        if len(breaks) < 2 or any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise ConfigurationError("piecewise-constant needs >= 2 increasing breakpoints")
        if len(values) != len(breaks) - 1:
            raise ConfigurationError("piecewise-constant needs len(values) == len(breaks) - 1")
        return cls("piecewise-constant", {"breaks": breaks, "values": tuple(as_complex(v) for v in values)})

    @classmethod
    def alternating(cls, M=1.0):
        """m(x) = (-1)^n M on [n, n+1): bounded, but not in V."""
        return cls("piecewise-constant", {"alternating": as_complex(M)})

    @classmethod
    def power_weight(cls, amplitude=1.0, exponent=1.0):
        """amplitude * (1 + x^2)^(-exponent)"""
        return cls("power-weight", {"amplitude": as_complex(amplitude), "exponent": float(exponent)})

    @classmethod
    def block(cls, spec):
        return cls("block-operator", {"spec": spec})

    # algebra --------------------------------------------------------------
    def __mul__(self, c):
        return Potential(self.kind, self.params, self.scale * complex(c), self.func)

    __rmul__ = __mul__

    def __add__(self, other):
        if self.pointwise is False or other.pointwise is False:
            raise ConfigurationError("block-operator potentials cannot be summed pointwise")
        return Potential("analytic-formula", {"name": "sum", "terms": (self, other)})

    # properties -----------------------------------------------------------
    @property
    def pointwise(self):
        return self.kind != "block-operator"

    @property
    def smooth(self):
        if self.kind == "analytic-formula":
            name = self.params["name"]
            if name == "sum":
                return all(t.smooth for t in self.params["terms"])
            if name == "custom":
                return bool(self.params.get("smooth", True))
            return True
        return self.kind == "power-weight"

    @property
    def support(self):
        """Bounding interval of the support, or None if unbounded."""
        if self.kind == "indicator":
            return (self.params["lo"], self.params["hi"])
        if self.kind == "piecewise-constant" and "breaks" in self.params:
            return (self.params["breaks"][0], self.params["breaks"][-1])
        if self.kind == "analytic-formula" and self.params["name"] == "sum":
            sups = [t.support for t in self.params["terms"]]
            if any(s is None for s in sups):
                return None
            return (min(s[0] for s in sups), max(s[1] for s in sups))
        return None

    @property
    def breakpoints(self):
        if self.kind == "indicator":
            return (self.params["lo"], self.params["hi"])
        if self.kind == "piecewise-constant":
            if "breaks" in self.params:
                return self.params["breaks"]
            return tuple(float(n) for n in range(-80, 81))
        if self.kind == "analytic-formula" and self.params["name"] == "sum":
            return tuple(sorted({p for t in self.params["terms"] for p in t.breakpoints}))
        return ()

    @property
    def is_complex(self):
        if self.scale.imag != 0:
            return True
        p = self.params
        if self.kind == "analytic-formula" and p["name"] == "sum":
            return any(t.is_complex for t in p["terms"])
        if self.kind == "analytic-formula" and p["name"] == "custom":
            return True
        vals = [v for v in p.values() if isinstance(v, complex)]
        for key in ("coefficients", "values"):
            vals.extend(p.get(key, ()))
        return any(complex(v).imag != 0 for v in vals)

    # evaluation -----------------------------------------------------------
    def evaluate(self, x):
        if not self.pointwise:
            raise DomainError("block-operator potentials have no pointwise values")
        x = np.asarray(x, dtype=float)
        out = self._raw(x)
        out = np.asarray(out, dtype=complex) * self.scale * np.ones_like(x)
        if not self.is_complex:
            return out.real
        return out

    def _raw(self, x):
        p = self.params
        if self.kind == "analytic-formula":
            name = p["name"]
            if name == "constant":
                return np.full(x.shape, p["value"])
            if name == "gaussian":
                return p["amplitude"] * np.exp(-(((x - p["center"]) / p["width"]) ** 2))
            if name == "polynomial":
                return np.polynomial.polynomial.polyval(x, np.array(p["coefficients"]))
            if name == "sum":
                return sum(t.evaluate(x) for t in p["terms"])
            return self.func(x)
        if self.kind == "indicator":
            return np.where((x >= p["lo"]) & (x <= p["hi"]), p["value"], 0.0)
        if self.kind == "piecewise-constant":
            if "alternating" in p:
                return np.where(np.floor(x) % 2 == 0, 1.0, -1.0) * p["alternating"]
            br = np.array(p["breaks"])
            idx = np.searchsorted(br, x, side="right") - 1
            inside = (idx >= 0) & (idx < len(p["values"]))
            vals = np.array(p["values"])
            return np.where(inside, vals[np.clip(idx, 0, len(vals) - 1)], 0.0)
        if self.kind == "power-weight":
            return p["amplitude"] * (1.0 + x * x) ** (-p["exponent"])
        raise DomainError(f"cannot evaluate {self.kind}")

    # serialization --------------------------------------------------------
    def to_config(self):
        p = self.params
        if self.kind == "block-operator":
            out = {"kind": self.kind, **p["spec"].to_config()}
        elif self.kind == "analytic-formula":
            name = p["name"]
            if name in ("sum", "custom"):
                raise ConfigurationError(f"analytic formula {name!r} is not serializable")
            out = {"kind": self.kind, "name": name}
            for key, val in p.items():
                if key == "name":
                    continue
                out[key] = [_plain(c) for c in val] if key == "coefficients" else (_plain(val) if isinstance(val, complex) else val)
        else:
            out = {"kind": self.kind}
            for key, val in p.items():
                if isinstance(val, complex):
                    out[key] = _plain(val)
                elif key == "values":
                    out[key] = [_plain(v) for v in val]
                elif isinstance(val, tuple):
                    out[key] = list(val)
                else:
                    out[key] = val
        if self.scale != 1:
            out["scale"] = _plain(self.scale)
        return out

    @classmethod
    def from_config(cls, cfg):
        cfg = dict(cfg)
        kind = cfg.pop("kind", None)
        scale = as_complex(cfg.pop("scale", 1.0))
        try:
            if kind == "analytic-formula":
                name = cfg.pop("name")
                if name == "constant":
                    pot = cls.constant(cfg.pop("value"))
                elif name == "gaussian":
                    pot = cls.gaussian(cfg.pop("amplitude", 1.0), cfg.pop("width", 1.0), cfg.pop("center", 0.0))
                elif name == "polynomial":
                    pot = cls.polynomial(cfg.pop("coefficients"))
                else:
                    raise ConfigurationError(f"unknown analytic formula {name!r}")
            elif kind == "indicator":
                pot = cls.indicator(cfg.pop("lo", -1.0), cfg.pop("hi", 1.0), cfg.pop("value", 1.0))
            elif kind == "piecewise-constant":
                if "alternating" in cfg:
                    pot = cls.alternating(cfg.pop("alternating"))
                else:
                    pot = cls.piecewise_constant(cfg.pop("breaks"), cfg.pop("values"))
            elif kind == "power-weight":
                pot = cls.power_weight(cfg.pop("amplitude", 1.0), cfg.pop("exponent", 1.0))
            elif kind == "block-operator":
                from .counterexample import BlockSpec

                pot = cls.block(BlockSpec.from_config(cfg))
                cfg = {}
            else:
                raise ConfigurationError(f"unknown potential kind {kind!r}")
        except KeyError as exc:
            raise ConfigurationError(f"potential.{exc.args[0]}: missing field") from None
        if cfg:
            raise ConfigurationError(f"potential.{sorted(cfg)[0]}: unknown field")
        return pot * scale if scale != 1 else pot


# ---------------------------------------------------------------------------
# function-space bookkeeping


def t_exponent(p):
    """Decay exponent of the Hermite-side Holder factor for L^p potentials."""
    if not (2 <= p < math.inf):
        raise DomainError(f"t(p) is defined for 2 <= p < inf, got {p}")
    if p == 4:
        raise DomainError("p = 4 is the logarithmic case: ||b h_n|| <= C n^(alpha/2 - 1/8) log(n+2)")
    # single division each, so rational spot values come out correctly rounded
    if p < 4:
        return -(p - 1.0) / (6.0 * p)
    return -1.0 / (2.0 * p)


@dataclass(frozen=True)
class SpaceTag:
    p: float
    alpha: float
    space: str  # Lp-alpha | Linf0 | Linf | V-empirical

    @property
    def embeds_in_V(self):
        if self.space in ("Linf0", "V-empirical"):
            return True
        if self.space == "Linf":
            return False
        if self.p == 4:
            return self.alpha < 0.25
        return self.alpha / 2 + t_exponent(self.p) <= 0


def classify(p, alpha=0.0):
    """SpaceTag for b in L(p, alpha); p = inf gives the plain L^inf tag."""
    if p == math.inf:
        return SpaceTag(math.inf, alpha, "Linf")
    if p < 2:
        raise DomainError(f"only p >= 2 is covered, got {p}")
    return SpaceTag(float(p), float(alpha), "Lp-alpha")


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class NormProfile:
    norms: np.ndarray
    sup: float
    argsup: int
    tail_slope: float
    decays: bool
    grid: dict
    refinement_change: float

    def to_rows(self):
        return [(k, float(v)) for k, v in enumerate(self.norms)]


def _profile_on(b, K, grid):
    vals = np.abs(np.asarray(b.evaluate(grid.nodes) if hasattr(b, "evaluate") else b(grid.nodes))) ** 2
    vals = vals * np.ones_like(grid.nodes)
    sq = hermite_table(grid.nodes, K) ** 2 @ (vals * grid.weights)
    return np.sqrt(np.maximum(sq, 0.0))


def v_norm_profile(b, K, grid=None, rtol=1e-8):
    """||b h_k||_2 for k = 0..K with a doubled-grid acceptance check."""
    if K < 0:
        raise DomainError(f"K must be non-negative, got {K}")
    if getattr(b, "pointwise", True) is False:
        raise DomainError("block-operator potentials have no V-norm profile")
    grid = grid or default_grid(K + 1, b)
    coarse = _profile_on(b, K, grid)
    fine = _profile_on(b, K, grid.refine())
    scale = np.maximum(np.abs(fine), 1e-300)
    change = float(np.max(np.abs(fine - coarse) / scale))
    if change > rtol:
        finer = _profile_on(b, K, grid.refine().refine())
        change2 = float(np.max(np.abs(finer - fine) / np.maximum(np.abs(finer), 1e-300)))
        if change2 > rtol:
            worst = int(np.argmax(np.abs(finer - fine)))
            raise AccuracyError(
                f"profile entry k={worst} did not converge (change {change2:.2e})",
                coarse=fine, fine=finer, where=worst,
            )
        fine, change = finer, change2
    m = len(fine)
    if m >= 8 and np.all(fine[m // 2:] > 0):
        ks = np.arange(m // 2, m)
        tail_slope = float(np.polyfit(np.log(ks + 1.0), np.log(fine[ks]), 1)[0])
    else:
        tail_slope = float("nan")
    q = max(1, m // 4)
    # margin keeps rounding noise on a flat profile from counting as decay
    decays = bool(np.mean(fine[-q:]) < (1.0 - 1e-8) * np.mean(fine[:q]))
    return NormProfile(
        norms=fine, sup=float(fine.max()), argsup=int(fine.argmax()), tail_slope=tail_slope,
        decays=decays, grid=grid.describe(), refinement_change=change,
    )


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    log_factor_detected: bool
    rss_power: float
    rss_log: float
    window: tuple


def decay_fit(profile, n_min=None, n_max=None):
    """Least-squares slope of log ||b h_n|| against log(n+1) on [n_min, n_max].

    A log(n+2) factor is flagged when adding exactly one power of it to the
    power-law model removes most of the residual drift.
    """
    norms = np.asarray(getattr(profile, "norms", profile), dtype=float)
    K = len(norms) - 1
    if n_min is None:
        n_min = (2 * K) // 3
    if n_max is None:
        n_max = K
    if n_max - n_min < 8:
        raise DomainError(f"fit window [{n_min}, {n_max}] is shorter than 8")
    n = np.arange(n_min, n_max + 1)
    y = norms[n]
    if np.any(y <= 0):
        raise DomainError("profile has zero entries inside the fit window")
    u = np.log(n + 1.0)
    ly = np.log(y)
    X = np.column_stack([np.ones_like(u), u])
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    rss_p = float(np.sum((ly - X @ coef) ** 2))
    ly2 = ly - np.log(np.log(n + 2.0))
    coef2, *_ = np.linalg.lstsq(X, ly2, rcond=None)
    rss_l = float(np.sum((ly2 - X @ coef2) ** 2))
    floor = 1e-20 * len(n)
    detected = bool(rss_p > floor and rss_l < 0.25 * rss_p)
    return DecayFit(float(coef[1]), float(coef[0]), detected, rss_p, rss_l, (int(n_min), int(n_max)))
