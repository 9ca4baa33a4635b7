"""Physical and run configuration with validation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field


@dataclass(frozen=True)
class PhysicalConfig:
    """Layered-fluid parameters.

    m layers occupy 0 < y < a_1 < ... < a_m at equilibrium; densities must
    decrease strictly upward (Rayleigh-Taylor ordering) so the jumps
    rho_{l+1} - rho_l (and -rho_m at the top) are negative.
    """

    m: int
    a: tuple
    rho: tuple
    mu: tuple
    sigma: tuple
    g: float = 1.0
    gamma: float = 1.0
    n: int = 2

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "rho", tuple(float(v) for v in self.rho))
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))
        object.__setattr__(self, "sigma", tuple(float(v) for v in self.sigma))
        if self.m < 1:
            raise ValueError("need at least one layer")
        for name in ("a", "rho", "mu", "sigma"):
            if len(getattr(self, name)) != self.m:
                raise ValueError(f"{name} must have length m={self.m}")
        if self.n not in (2, 3):
            raise ValueError("dimension n must be 2 or 3")
        prev = 0.0
        for v in self.a:
            if v <= prev:
                raise ValueError("depths must be strictly increasing and positive")
            prev = v
        if any(v <= 0 for v in self.mu):
            raise ValueError("viscosities must be positive")
        if any(v < 0 for v in self.sigma):
            raise ValueError("surface tensions must be nonnegative")

    def validate_rt(self):
        prev = float("inf")
        for r in self.rho:
            if not (0 < r < prev):
                raise ValueError("Rayleigh-Taylor ordering violated: densities "
                                 "must be strictly decreasing and positive")
            prev = r

    def rho_jump(self, layer: int) -> float:
        """[[rho]]_l = rho_{l+1} - rho_l for l < m-1 (0-based), -rho_m at top."""
        if layer == self.m - 1:
            return -self.rho[-1]
        return self.rho[layer + 1] - self.rho[layer]

    def min_gap(self) -> float:
        gaps = [self.a[0]] + [self.a[i + 1] - self.a[i] for i in range(self.m - 1)]
        return min(gaps)

    def validate_mode(self, mode: str):
        if mode == "surface_tension":
            if any(s <= 0 for s in self.sigma):
                raise ValueError("surface_tension mode requires all sigma > 0")
        elif mode == "zero_surface_tension":
            if self.n != 2:
                raise ValueError("zero_surface_tension mode requires n = 2")
            if any(s != 0 for s in self.sigma):
                raise ValueError("zero_surface_tension mode requires sigma = 0")
        else:
            raise ValueError(f"unknown mode {mode!r}")

    def digest(self) -> str:
        blob = json.dumps(
            {
                "m": self.m, "a": self.a, "rho": self.rho, "mu": self.mu,
                "sigma": self.sigma, "g": self.g, "gamma": self.gamma, "n": self.n,
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def reference_config(mode: str = "surface_tension", gamma: float = 1.0) -> PhysicalConfig:
    sigma = (0.5, 0.5) if mode == "surface_tension" else (0.0, 0.0)
    return PhysicalConfig(m=2, a=(1.0, 2.0), rho=(2.0, 1.0), mu=(1.0, 0.5),
                          sigma=sigma, g=1.0, gamma=gamma, n=2)


@dataclass
class RunConfig:
    """Parsed CLI/TOML run configuration."""

    physical: PhysicalConfig
    mode: str = "surface_tension"
    L: float = 1.0
    N: int = 128
    degree: int = 32
    rtol: float = 1e-9
    atol: float = 1e-13
    max_iter: int = 50
    seed: int = 0
    forcing: dict = field(default_factory=dict)
    threads: int = 1

    def __post_init__(self):
        # gamma != 0 is enforced by the solvers that need it; symbol sweeps
        # legitimately run at gamma = 0 against the exponential oracle
        self.physical.validate_rt()
        self.physical.validate_mode(self.mode)

    @classmethod
    def from_toml(cls, path) -> "RunConfig":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib

        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        phys = doc.get("physical", {})
        pc = PhysicalConfig(
            m=phys["m"], a=phys["a"], rho=phys["rho"], mu=phys["mu"],
            sigma=phys["sigma"], g=phys.get("g", 1.0),
            gamma=phys.get("gamma", 1.0), n=phys.get("n", 2),
        )
        gridsec = doc.get("grid", {})
        solver = doc.get("solver", {})
        return cls(
            physical=pc,
            mode=doc.get("mode", "surface_tension"),
            L=gridsec.get("L", 1.0),
            N=gridsec.get("N", 128),
            degree=gridsec.get("degree", 32),
            rtol=solver.get("rtol", 1e-9),
            atol=solver.get("atol", 1e-13),
            max_iter=solver.get("max_iter", 50),
            seed=doc.get("seed", 0),
            forcing=doc.get("forcing", {}),
            threads=doc.get("threads", 1),
        )

    def digest(self) -> str:
        blob = json.dumps(
            {
                "phys": self.physical.digest(), "mode": self.mode, "L": self.L,
                "N": self.N, "degree": self.degree, "rtol": self.rtol,
                "atol": self.atol, "max_iter": self.max_iter, "seed": self.seed,
                "forcing": self.forcing,
            },
            sort_keys=True, default=str,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]
