"""Bulk potentials, substrate patterning, and boundary flux terms.

The three volume fractions satisfy phi_p + phi_nfa + phi_s = 1, and the solver
evolves only phi_p and phi_nfa, so every derivative here treats
phi_s = 1 - phi_p - phi_nfa as a dependent quantity (chain rule with
d phi_s / d phi_p = -1).  That shared dependence is what couples the two
transported species through the potential.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelParams",
    "poly_potential_derivs",
    "log_potential_derivs",
    "potential_derivs",
    "substrate_pattern",
    "surface_flux_bottom",
    "evaporation_flux_top",
    "LOG_CLAMP",
]

# floor for volume fractions inside logarithms; keeps the optional
# logarithmic path runnable when discretization errors push phi below 0
LOG_CLAMP = 1e-8

_POTENTIALS = ("polynomial", "logarithmic", "none")


@dataclass
class ModelParams:
    """Physical and run parameters with the defaults of the benchmark setup.

    ``potential`` selects the bulk energy: the quartic polynomial blend
    energy (production path), the Flory-Huggins logarithmic energy
    (optional; clamped evaluation), or ``"none"`` which zeroes the bulk
    term and is only useful for linear-flow diagnostics.
    """

    eps_p: float = 1e-3
    eps_nfa: float = 1e-3
    mob_p: float = 1.0
    mob_nfa: float = 1.0
    tau: float = 1e-4
    chi_p_nfa: float = 1.0
    chi_p_s: float = 0.3
    chi_nfa_s: float = 0.3
    N_p: float = 20.0
    N_nfa: float = 20.0
    N_s: float = 1.0
    k_evap: float = 5e-3
    g_p: float = 0.01
    g_nfa: float = 0.01
    h_p: float = 0.0
    h_nfa: float = 0.0
    patterning: bool = False
    potential: str = "polynomial"
    final_time: float = 2e-3
    seed: int = 0
    init_mean: float = 0.35
    init_ampl: float = 0.01

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = {
            "eps_p": self.eps_p, "eps_nfa": self.eps_nfa,
            "mob_p": self.mob_p, "mob_nfa": self.mob_nfa,
            "tau": self.tau, "N_p": self.N_p, "N_nfa": self.N_nfa,
            "N_s": self.N_s, "final_time": self.final_time,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.k_evap < 0:
            raise ValueError(f"k_evap must be nonnegative, got {self.k_evap}")
        if self.potential not in _POTENTIALS:
            raise ValueError(
                f"potential must be one of {_POTENTIALS}, got {self.potential!r}"
            )
        lo = self.init_mean - self.init_ampl
        hi = self.init_mean + self.init_ampl
        if not (0.0 < lo and hi < 1.0):
            raise ValueError(
                f"init_mean +- init_ampl must lie inside (0, 1), got [{lo}, {hi}]"
            )

    def species(self, name: str) -> dict:
        """Per-species parameter view, ``name`` in {"p", "nfa"}."""
        if name == "p":
            return {"eps": self.eps_p, "mob": self.mob_p,
                    "g": self.g_p, "h": self.h_p}
        if name == "nfa":
            return {"eps": self.eps_nfa, "mob": self.mob_nfa,
                    "g": self.g_nfa, "h": self.h_nfa}
        raise ValueError(f"species must be 'p' or 'nfa', got {name!r}")


def poly_potential_derivs(phi_p, phi_nfa):
    """Partial derivatives of the polynomial blend energy.

    f = 3.5 phi_p^2 phi_nfa^2 + 0.1 phi_s^2 with phi_s eliminated, so the
    solvent term contributes -0.2 phi_s to both derivatives.
    """
    phi_p = np.asarray(phi_p, dtype=float)
    phi_nfa = np.asarray(phi_nfa, dtype=float)
    # symmetric grouping so swapping the fields swaps the outputs exactly
    phi_s = 1.0 - (phi_p + phi_nfa)
    cross = 7.0 * (phi_p * phi_nfa)
    df_dp = cross * phi_nfa - 0.2 * phi_s
    df_dnfa = cross * phi_p - 0.2 * phi_s
    return df_dp, df_dnfa


def log_potential_derivs(phi_p, phi_nfa, params: ModelParams):
    """Partial derivatives of the Flory-Huggins energy, with clamping.

    Fractions inside the logarithms are clamped to [LOG_CLAMP, 1] so the
    evaluation never produces NaN; the number of clamped nodes is returned
    as a diagnostic third value.
    """
    phi_p = np.asarray(phi_p, dtype=float)
    phi_nfa = np.asarray(phi_nfa, dtype=float)
    phi_s = 1.0 - (phi_p + phi_nfa)

    cp = np.clip(phi_p, LOG_CLAMP, 1.0)
    cn = np.clip(phi_nfa, LOG_CLAMP, 1.0)
    cs = np.clip(phi_s, LOG_CLAMP, 1.0)
    clamped = int(np.count_nonzero((cp != phi_p) | (cn != phi_nfa) | (cs != phi_s)))

    df_dp = (
        (np.log(cp) + 1.0) / params.N_p
        - (np.log(cs) + 1.0) / params.N_s
        + params.chi_p_nfa * phi_nfa
        + params.chi_p_s * (phi_s - phi_p)
        - params.chi_nfa_s * phi_nfa
    )
    df_dnfa = (
        (np.log(cn) + 1.0) / params.N_nfa
        - (np.log(cs) + 1.0) / params.N_s
        + params.chi_p_nfa * phi_p
        + params.chi_nfa_s * (phi_s - phi_nfa)
        - params.chi_p_s * phi_p
    )
    return df_dp, df_dnfa, clamped


def potential_derivs(phi_p, phi_nfa, params: ModelParams):
    """Dispatch on ``params.potential``; returns (df_dp, df_dnfa)."""
    if params.potential == "polynomial":
        return poly_potential_derivs(phi_p, phi_nfa)
    if params.potential == "logarithmic":
        df_dp, df_dnfa, _ = log_potential_derivs(phi_p, phi_nfa, params)
        return df_dp, df_dnfa
    zero = np.zeros_like(np.asarray(phi_p, dtype=float))
    return zero, zero.copy()


def substrate_pattern(x, species: str, x_max: float, patterning: bool):
    """Substrate preference indicator p_p or p_nfa at position(s) x on the floor.

    With patterning on, the polymer-preferring set is the union of closed
    intervals [0, 1/6], [1/3, 1/2], [2/3, 5/6] (times x_max) and the
    acceptor-preferring set is the complementary union of closed intervals;
    the sets overlap only at interval endpoints, where both indicators are 1.
    With patterning off both are identically 1.
    """
    x = np.asarray(x, dtype=float)
    if species not in ("p", "nfa"):
        raise ValueError(f"species must be 'p' or 'nfa', got {species!r}")
    if not patterning:
        return np.ones_like(x)
    # membership in [k x_max/6, m x_max/6] tested as k x_max <= 6 x <= m x_max
    # so interval endpoints stay exact whenever x_max/6 is representable
    if species == "p":
        sixths = ((0, 1), (2, 3), (4, 5))
    else:
        sixths = ((1, 2), (3, 4), (5, 6))
    scaled = 6.0 * x
    out = np.zeros_like(x)
    for lo, hi in sixths:
        out = np.where((scaled >= lo * x_max) & (scaled <= hi * x_max), 1.0, out)
    return out


def surface_flux_bottom(phi, species: str, params: ModelParams, x, x_max: float):
    """Substrate flux density p(x) * (g + 2 h phi) at nodes on the floor."""
    phi = np.asarray(phi, dtype=float)
    sp = params.species(species)
    pattern = substrate_pattern(x, species, x_max, params.patterning)
    return pattern * (sp["g"] + 2.0 * sp["h"] * phi)


def evaporation_flux_top(phi_species, phi_s, params: ModelParams):
    """Evaporation-driven flux -k phi phi_s at nodes on the free surface."""
    phi_species = np.asarray(phi_species, dtype=float)
    phi_s = np.asarray(phi_s, dtype=float)
    return -params.k_evap * phi_species * phi_s
