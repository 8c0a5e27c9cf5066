"""Self-convergence studies: rerun a configuration over a ladder of step
sizes or mesh widths and measure errors against a much finer reference.

Errors are root-mean-square over the full unknown vector at the final
time, err = ||(u1, u2, Ln, Ls) - ref||_2 / sqrt(2 (m + 1)); in space mode
the reference fields are restricted to each coarse mesh by conservative
cell averaging first (the overlap-weighted form, so the reference
resolution need not be a multiple of every level).  Observed orders are
log2(e_k / e_{k+1}) between consecutive levels.
"""

from dataclasses import dataclass

import numpy as np

from . import config as config_mod
from . import timeloop
from .errors import ConfigError

__all__ = ["ConvergenceRow", "ConvergenceResult", "restrict_cell_averages",
           "state_error", "converge"]


@dataclass
class ConvergenceRow:
    level: int
    tau_or_h: float
    error: float
    observed_order: float | None


@dataclass
class ConvergenceResult:
    mode: str
    rows: list
    ref_tau_or_h: float
    t_end: float

    def orders(self):
        return [r.observed_order for r in self.rows if r.observed_order is not None]


def restrict_cell_averages(fine, m_coarse):
    """Conservative restriction of fine-grid cell averages to m_coarse cells."""
    fine = np.asarray(fine, dtype=float)
    m_fine = fine.size
    if m_fine < m_coarse:
        raise ValueError("restriction target must be coarser than the source")
    h_f = 1.0 / m_fine
    h_c = 1.0 / m_coarse
    out = np.zeros(m_coarse)
    for f in range(m_fine):
        lo = f * h_f
        hi = lo + h_f
        j0 = min(int(lo / h_c), m_coarse - 1)
        j1 = min(int(hi / h_c - 1e-12), m_coarse - 1)
        if j0 == j1:
            out[j0] += fine[f] * h_f
        else:
            for j in range(j0, j1 + 1):
                ov = min(hi, (j + 1) * h_c) - max(lo, j * h_c)
                if ov > 0.0:
                    out[j] += fine[f] * ov
    return out / h_c


def state_error(y, y_ref, m, m_ref):
    """RMS distance between a coarse state and a (possibly finer) reference."""
    u1, u2, ln, ls = y[:m], y[m: 2 * m], y[-2], y[-1]
    r1, r2 = y_ref[:m_ref], y_ref[m_ref: 2 * m_ref]
    if m_ref != m:
        r1 = restrict_cell_averages(r1, m)
        r2 = restrict_cell_averages(r2, m)
    diff = np.concatenate([u1 - r1, u2 - r2, [ln - y_ref[-2]], [ls - y_ref[-1]]])
    return float(np.linalg.norm(diff) / np.sqrt(2.0 * (m + 1)))


def _with(cfg, tau=None, m=None):
    sim = dict(cfg)
    sim.pop("converge", None)
    if tau is not None:
        sim = dict(sim, time=dict(sim["time"], tau=tau))
    if m is not None:
        sim = dict(sim, grid={"m": m})
    return sim


def _m_from_h(h):
    m = int(round(1.0 / h))
    if m < 2 or abs(m * h - 1.0) > 1e-9:
        raise ConfigError(f"mesh width h = {h:g} does not tile the unit interval")
    return m


def converge(cfg, progress=None):
    """Run the sweep described by the config's ``converge`` section."""
    cfg = config_mod.normalize_config(cfg)
    if "converge" not in cfg:
        raise ConfigError("config has no converge section")
    c = cfg["converge"]
    mode = c["mode"]
    levels = c["levels"]

    def report(msg):
        if progress is not None:
            progress(msg)

    if mode == "time":
        ref_tau = c["ref_tau"]
        values = [c["base_tau"] * 2.0 ** (-k) for k in range(1, levels + 1)]
        if ref_tau >= min(values):
            raise ConfigError(
                f"reference tau = {ref_tau:g} must be strictly smaller than "
                f"the finest level tau = {min(values):g}")
        report(f"reference run (tau = {ref_tau:g})")
        ref = timeloop.run(config_mod.build_simulation(_with(cfg, tau=ref_tau)))
        m = cfg["grid"]["m"]
        errors = []
        for k, tau in enumerate(values, start=1):
            report(f"level {k} (tau = {tau:g})")
            rec = timeloop.run(config_mod.build_simulation(_with(cfg, tau=tau)))
            errors.append(state_error(rec.y_final, ref.y_final, m, m))
        ref_value = ref_tau
    else:
        ref_h = c["ref_h"]
        m_ref = _m_from_h(ref_h)
        values = [c["base_h"] * 2.0 ** (-k) for k in range(1, levels + 1)]
        if ref_h >= min(values):
            raise ConfigError(
                f"reference h = {ref_h:g} must be strictly smaller than "
                f"the finest level h = {min(values):g}")
        report(f"reference run (h = {ref_h:g}, m = {m_ref})")
        ref = timeloop.run(config_mod.build_simulation(_with(cfg, m=m_ref)))
        errors = []
        for k, h in enumerate(values, start=1):
            m = _m_from_h(h)
            report(f"level {k} (h = {h:g}, m = {m})")
            rec = timeloop.run(config_mod.build_simulation(_with(cfg, m=m)))
            errors.append(state_error(rec.y_final, ref.y_final, m, m_ref))
        ref_value = ref_h

    rows = []
    for k in range(levels):
        if k + 1 < levels and errors[k] > 0.0 and errors[k + 1] > 0.0:
            order = float(np.log2(errors[k] / errors[k + 1]))
        else:
            order = None
        rows.append(ConvergenceRow(
            level=k + 1, tau_or_h=values[k], error=errors[k], observed_order=order))
    return ConvergenceResult(mode=mode, rows=rows, ref_tau_or_h=ref_value,
                             t_end=cfg["time"]["t_end"])
