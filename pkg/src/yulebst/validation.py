"""Named end-to-end checks with pinned tolerances, shared by the CLI and tests."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import analysis, constants, oracle, profile, yule
from .rng import RandomStream


@dataclass
class Scale:
    oracle_trials: int = 10**6
    psi_trials: int = 10**5
    zeta_m: int = 10**4
    zeta_n: int = 10**6
    lemma_steps: int = 10**7
    fringe_steps: int = 10**7
    fringe_seeds: int = 20
    race_trials: int = 10**6
    ensemble_n: int = 10**6
    ensemble_members: int = 200
    perf_steps: int = 5 * 10**7
    se_band: float = 3.0

    @classmethod
    def quick(cls) -> "Scale":
        return cls(oracle_trials=10**4, psi_trials=10**4, zeta_m=10**3, zeta_n=10**4,
                   lemma_steps=10**5, fringe_steps=10**5, fringe_seeds=20, race_trials=10**4,
                   ensemble_n=10**4, ensemble_members=20, perf_steps=10**7, se_band=4.0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name} ({self.seconds:.2f}s) {self.detail}"


def _timed(name, fn, *args) -> CheckResult:
    t0 = time.perf_counter()
    passed, detail = fn(*args)
    return CheckResult(name, bool(passed), detail, time.perf_counter() - t0)


def check_constants(scale: Scale, seed: int):
    c = constants.solve_constants(1e-12)
    printed = (round(c.a, 5) == 0.76804 and round(c.b, 5) == 3.31107
               and round(c.alpha, 4) == 1.6783 and round(c.beta, 4) == 0.6266)
    res_eq = max(abs(c.residual_a), abs(c.residual_alpha))
    res_crit = max(abs(constants.criticality_residual(c.a)),
                   abs(constants.criticality_residual_reflected(c.alpha)))
    detail = {"a": c.a, "b": c.b, "alpha": c.alpha, "beta": c.beta,
              "equation_residual": res_eq, "criticality_residual": res_crit}
    return printed and res_eq < 1e-12 and res_crit < 1e-10, detail


def check_small_n_exact(scale: Scale, seed: int):
    F = oracle.Fraction
    want = {"H": {2: F(1, 3), 3: F(2, 3)}, "h": {1: F(2, 3), 2: F(1, 3)}, "F": {2: F(2, 3), 4: F(1, 3)}}
    laws_ok = all(oracle.exact_distribution(4, s).entries == v for s, v in want.items())
    enum_ok = all(oracle.exact_distribution(n, s).entries == oracle.enumerate_sequences(n, s).entries
                  for n in range(1, 6) for s in oracle.STATISTICS)
    return laws_ok and enum_ok, {"paper_laws": laws_ok, "enumeration_n_le_5": enum_ok}


def check_simulator_vs_oracle(scale: Scale, seed: int):
    detail, ok = {}, True
    for n in (4, 5, 8):
        rep = oracle.compare_simulators(n, scale.oracle_trials, RandomStream(seed, n))
        detail[n] = {"min_p": rep.min_p(), "saturation_mismatches": rep.saturation_mismatches}
        ok &= rep.min_p() > 0.001 and rep.saturation_mismatches == 0
    return ok, detail


def check_psi(scale: Scale, seed: int):
    c = constants.default_constants()
    detail, ok = {}, True
    for i, theta in enumerate((0.0, 0.5, c.a, -c.alpha)):
        mean, se = yule.psi_mc_estimate(theta, scale.psi_trials, RandomStream(seed, 100 + i))
        z = (mean - constants.psi(theta)) / se
        detail[f"{theta:.5f}"] = {"mc_mean": mean, "stderr": se, "closed_form": constants.psi(theta), "z": z}
        ok &= abs(z) <= scale.se_band
    return ok, detail


def check_zeta(scale: Scale, seed: int):
    z = yule.zeta_samples(RandomStream(seed, 200), scale.zeta_n, scale.zeta_m)
    d, p = yule.ks_statistic(z, "exp1")
    se = z.std(ddof=1) / math.sqrt(len(z))
    mean_z = (z.mean() - 1.0) / se
    d_g, p_g = yule.ks_statistic(z, "gumbel")
    detail = {"ks_exp1_D": d, "ks_exp1_p": p, "mean": float(z.mean()), "mean_z_vs_1": float(mean_z),
              "fraction_negative": float(np.mean(z < 0)), "ks_gumbel_p": p_g}
    return p > 0.01 and abs(mean_z) <= scale.se_band, detail


def check_frontier_lemma(scale: Scale, seed: int):
    trace = analysis.fringe_trace(RandomStream(seed, 300), scale.lemma_steps + 1,
                                  schedule=profile.CheckpointSchedule((scale.lemma_steps + 1,), 2.0))
    run_fail = trace.stats.lemma_fail
    dp_fail = 0
    dp_states = 0
    for n in range(2, 11):
        for counts in oracle.reachable_profiles(n):
            dp_states += 1
            if analysis.frontier_lemma_check(profile.LevelProfile.from_counts(counts)) == "fail":
                dp_fail += 1
    return run_fail == 0 and dp_fail == 0, {"run_failures": run_fail, "run_checked": trace.stats.lemma_pass,
                                            "dp_states": dp_states, "dp_failures": dp_fail}


def check_fringe(scale: Scale, seed: int):
    mins, maxs = [], []
    for s in range(scale.fringe_seeds):
        tr = analysis.fringe_trace(RandomStream(seed, 400 + s), scale.fringe_steps + 1,
                                   schedule=profile.CheckpointSchedule((scale.fringe_steps + 1,), 2.0))
        mins.append(tr.stats.min_F)
        maxs.append(tr.stats.max_F)
    big = sum(m >= 8 for m in maxs)
    need = math.ceil(0.9 * scale.fringe_seeds)
    return all(m == 2 for m in mins) and big >= need, {"min_F": mins, "max_F": maxs, "runs_max_ge_8": big}


def check_race(scale: Scale, seed: int):
    detail, ok = {}, True
    for k in (1, 2, 4):
        est, se = analysis.gamma_mc(k, scale.race_trials, RandomStream(seed, 500 + k))
        target = analysis.gamma_lower_bound(k)
        z = (est - target) / se
        detail[k] = {"estimate": est, "stderr": se, "closed_form": target, "z": z}
        ok &= abs(z) <= scale.se_band
    return ok, detail


def check_asymptotics(scale: Scale, seed: int, jobs: int = 1):
    s = analysis.ensemble_run(analysis.EnsembleConfig(scale.ensemble_n, scale.ensemble_members, seed, 1.05, 0.1, jobs))
    rh, rs = s.final_mean("R_height"), s.final_mean("R_saturation")
    gh, gs = float(s.gap_fraction("R_height")), float(s.gap_fraction("R_saturation"))
    ok = 0.5 <= rh <= 2.5 and 0.5 <= rs <= 2.5 and gh >= 0.99 and gs >= 0.99
    return ok, {"mean_R_height": rh, "mean_R_saturation": rs, "gap_fraction_height": gh, "gap_fraction_saturation": gs}


def measure_throughput(steps: int, seed: int = 0) -> float:
    p = profile.new_profile()
    rng = RandomStream(seed, 600)
    profile.advance_to(p, rng, 1000)
    t0 = time.perf_counter()
    profile.advance_to(p, rng, 1000 + steps)
    return steps / (time.perf_counter() - t0)


def check_performance(scale: Scale, seed: int):
    rate = measure_throughput(scale.perf_steps, seed)
    return rate >= 5e6, {"steps_per_second": rate, "seconds_for_1e9": 1e9 / rate}


CHECKS = {
    "constants": check_constants,
    "small_n_exact": check_small_n_exact,
    "simulator_vs_oracle": check_simulator_vs_oracle,
    "psi_monte_carlo": check_psi,
    "zeta_exp1": check_zeta,
    "frontier_lemma": check_frontier_lemma,
    "fringe_behaviour": check_fringe,
    "gamma_race": check_race,
    "asymptotics": check_asymptotics,
    "performance": check_performance,
}


def run_check(name: str, scale: Scale, seed: int = 0) -> CheckResult:
    return _timed(name, CHECKS[name], scale, seed)


def run_all(scale: Scale, seed: int = 0, names=None) -> list[CheckResult]:
    return [run_check(n, scale, seed) for n in (names or CHECKS)]
