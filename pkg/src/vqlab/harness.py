"""Experiment configs, orchestration and the ``vqlab`` command line.

A config is one JSON document::

    {"schema": 1, "id": "vubqc-x", "protocol": "vubqc",
     "instance": {"chain": []}, "adversary": {"kind": "pauli", "pauli": "X"},
     "trials": 10000, "seed": 7}

``run`` writes ``transcripts/<id>.jsonl`` and ``summary.csv`` under ``--out``.
Exit codes: 0 ok, 1 bound violation (with ``--assert-bounds``) or a failed
lemma, 2 config or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import circuit as circ
from . import entbased, mbqc, prepsend, qsim, recvmeas, stats
from .adversary import AttackSpec, make_prover
from .protocol import ProtocolOutcome, trial_rng

SCHEMA_VERSION = 1
MAX_TRIALS = 10**6
PROTOCOLS = ("childs", "ubqc", "vubqc", "toc", "cqas", "mo", "posthoc", "chsh")
SUMMARY_FIELDS = (
    "id", "protocol", "attack", "trials", "accept_rate", "accept_low", "accept_high",
    "incorrect_accept_rate", "incorrect_accept_low", "incorrect_accept_high",
    "metric", "measured", "op", "bound", "bound_ref", "verdict", "method",
)


class ConfigError(ValueError):
    """Schema or cap violation in an experiment config."""


# ---------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    protocol: str
    instance: dict = field(default_factory=dict)
    adversary: AttackSpec = field(default_factory=AttackSpec.honest)
    trials: int = 100
    seed: int = 0
    id: str = ""
    bound: dict | None = None

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        if not isinstance(d, Mapping):
            raise ConfigError("config must be a JSON object")
        allowed = {"schema", "id", "protocol", "instance", "adversary", "trials", "seed", "bound"}
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if d.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema {d.get('schema')!r}")
        protocol = d.get("protocol")
        if protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}")
        trials = d.get("trials", 100)
        if not isinstance(trials, int) or isinstance(trials, bool) or not 1 <= trials <= MAX_TRIALS:
            raise ConfigError(f"trials must be an integer in [1, {MAX_TRIALS}]")
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        instance = d.get("instance", {})
        if not isinstance(instance, Mapping):
            raise ConfigError("instance must be an object")
        try:
            adversary = AttackSpec.from_dict(d.get("adversary", {"kind": "honest"}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad adversary: {exc}") from None
        bound = d.get("bound")
        if bound is not None:
            _check_bound(bound)
        cfg = cls(protocol, dict(instance), adversary, trials, seed, str(d.get("id") or protocol), bound)
        build_instance(cfg)  # validate eagerly
        return cfg

    def with_overrides(self, seed: int | None = None, trials: int | None = None) -> "ExperimentConfig":
        out = ExperimentConfig(self.protocol, dict(self.instance), self.adversary, self.trials, self.seed, self.id, self.bound)
        if seed is not None:
            out.seed = seed
        if trials is not None:
            if not 1 <= trials <= MAX_TRIALS:
                raise ConfigError("trials out of range")
            out.trials = trials
        return out


def _check_bound(b) -> None:
    if not isinstance(b, Mapping) or set(b) - {"metric", "op", "value", "ref"}:
        raise ConfigError("bound needs metric, op, value (and an optional ref)")
    if b.get("metric") not in ("accept", "incorrect_accept", "win_rate"):
        raise ConfigError("bound metric must be accept, incorrect_accept or win_rate")
    if b.get("op") not in ("<=", ">="):
        raise ConfigError("bound op must be <= or >=")
    if not isinstance(b.get("value"), (int, float)) or not 0 <= b["value"] <= 1:
        raise ConfigError("bound value must be a probability")


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return ExperimentConfig.from_dict(data)


def _bits(v, name: str) -> list[int]:
    if isinstance(v, str):
        v = [int(c) for c in v]
    if not isinstance(v, (list, tuple)) or any(b not in (0, 1) for b in v):
        raise ConfigError(f"{name} must be a bit string or bit list")
    return list(v)


def _circuit(inst: Mapping, key: str = "circuit") -> tuple:
    text = inst.get(key)
    if not isinstance(text, str):
        raise ConfigError(f"instance.{key} must be a gate-list string such as 'H 0; CNOT 0 1'")
    try:
        return circ.parse_circuit(text)
    except ValueError as exc:
        raise ConfigError(f"bad circuit: {exc}") from None


def _chain(inst: Mapping) -> mbqc.MeasurementPattern:
    angles = inst.get("chain", [])
    if not isinstance(angles, list) or any(not isinstance(a, int) for a in angles):
        raise ConfigError("instance.chain must be a list of integer angles")
    return mbqc.chain_pattern([a % 8 for a in angles], is_input=False, readout=True)


def build_instance(cfg: ExperimentConfig) -> dict:
    """Turn the JSON instance into the objects each protocol runner takes."""
    p, inst = cfg.protocol, cfg.instance
    try:
        if p == "childs":
            gates = _circuit(inst)
            n = max(circ.width(gates), len(inst.get("input", "")))
            bits = _bits(inst.get("input", [0] * n), "input")
            return {"gates": gates, "input": qsim.basis_state(bits)}
        if p == "ubqc":
            if "circuit" in inst:
                gates = _circuit(inst)
                width = int(inst.get("width", circ.width(gates)))
                pattern = mbqc.compile_brickwork(gates, width, readout=True, inputs=False)
                plus = qsim.product_state([qsim.plus_state()] * width)
                probs = circ.simulate(gates, width, plus).probabilities()
                ref = {tuple(int(c) for c in format(i, f"0{width}b")): float(q) for i, q in enumerate(probs) if q > 1e-12}
            else:
                pattern = _chain(inst)
                ref = mbqc.exact_readout_distribution(pattern)
            return {"pattern": pattern, "reference": ref}
        if p == "vubqc":
            pattern = _chain(inst)
            prepsend.vubqc_chain(pattern)
            return {"pattern": pattern}
        if p == "toc":
            gates = _circuit(inst)
            run_type = inst.get("run_type", "random")
            if run_type not in prepsend.RUN_TYPES + ("random",):
                raise ConfigError(f"run_type must be one of {prepsend.RUN_TYPES + ('random',)}")
            prepsend.toc_expand(gates)
            return {"gates": gates, "run_type": run_type}
        if p == "cqas":
            gates = _circuit(inst)
            m = inst.get("m", 1)
            if m not in (1, 2):
                raise ConfigError("m must be 1 or 2")
            bits = _bits(inst.get("input", [0] * circ.width(gates)), "input")
            if 3 * len(bits) > qsim.MAX_STATE_QUBITS and (m + 1) * len(bits) > qsim.MAX_STATE_QUBITS:
                raise ConfigError("too many blocks for the shared register")
            return {"gates": gates, "m": m, "input_bits": bits}
        if p == "mo":
            pattern = _chain(inst)
            k = inst.get("k", 1)
            if not isinstance(k, int) or not 1 <= k <= recvmeas.MAX_MO_K:
                raise ConfigError(f"k must be an integer in [1, {recvmeas.MAX_MO_K}]")
            mode = inst.get("mode", "graph")
            return {"pattern": pattern, "graph": pattern.graph, "k": k, "mode": mode}
        if p == "posthoc":
            gates = _circuit(inst)
            x = _bits(inst.get("x", [0] * circ.width(gates)), "x")
            h = recvmeas.build_clock_hamiltonian(gates, x)
            reps = inst.get("repetitions")
            if reps is not None and (not isinstance(reps, int) or reps < 1):
                raise ConfigError("repetitions must be a positive integer")
            mode = inst.get("mode", "fk")
            return {"gates": gates, "x": x, "hamiltonian": h, "repetitions": reps, "mode": mode}
        if p == "chsh":
            return {"strategy": _strategy(inst)}
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"bad {p} instance: {exc}") from None
    raise ConfigError(f"unknown protocol {p!r}")


def _strategy(inst: Mapping):
    kind = inst.get("strategy", "ideal")
    if kind == "ideal":
        return entbased.ideal_strategy()
    if kind == "classical":
        return entbased.ClassicalStrategy(tuple(inst.get("table", (0, 0, 0, 0))))
    if kind == "quantum":
        return entbased.QuantumStrategy(tuple(inst.get("alice", ("Z", "X"))), tuple(inst.get("bob", ("(X+Z)/√2", "(Z-X)/√2"))))
    if kind == "deviated":
        from .adversary import _parse_matrix

        u = np.asarray(_parse_matrix(inst["unitary"]), dtype=complex)
        if u.shape != (2, 2) or not np.allclose(u @ u.conj().T, np.eye(2), atol=1e-9):
            raise ConfigError("deviation must be a 2x2 unitary")
        return entbased.QuantumStrategy(deviation=tuple(map(tuple, u)))
    raise ConfigError("strategy must be ideal, classical, quantum or deviated")


def default_bound(cfg: ExperimentConfig, inst: Mapping) -> dict | None:
    """Quantitative bound each protocol is checked against when the config names none."""
    p = cfg.protocol
    if p == "chsh":
        return {"metric": "win_rate", "op": "<=", "value": entbased.TSIRELSON, "ref": "cos^2(pi/8) quantum maximum"}
    if cfg.adversary.is_honest:
        if p == "posthoc":
            return None  # honest acceptance depends on the instance's decision
        return {"metric": "incorrect_accept", "op": "<=", "value": 0.0, "ref": "honest prover is never wrong"}
    if p == "vubqc":
        n = len(inst["pattern"].order) + 3
        return {"metric": "incorrect_accept", "op": "<=", "value": 1 - 1 / n, "ref": f"single trap 1 - 1/N, N = {n}"}
    if p == "toc":
        return {"metric": "incorrect_accept", "op": "<=", "value": 2 / 3, "ref": "test-or-compute 2/3"}
    if p == "cqas":
        m = inst["m"]
        return {"metric": "incorrect_accept", "op": "<=", "value": 2.0**-m, "ref": f"Clifford authentication 2^-m, m = {m}"}
    return None


# ---------------------------------------------------------------- running


@dataclass
class SummaryRow:
    id: str
    protocol: str
    attack: str
    trials: int
    accept: stats.Estimate
    incorrect_accept: stats.Estimate
    metric: str = ""
    measured: float = float("nan")
    op: str = ""
    bound: float | None = None
    bound_ref: str = ""
    verdict: str = "NA"

    def to_csv(self) -> dict:
        def fmt(v):
            if isinstance(v, float):
                return f"{v:.6f}" if math.isfinite(v) else ""
            return "" if v is None else str(v)

        return {
            "id": self.id, "protocol": self.protocol, "attack": self.attack, "trials": self.trials,
            "accept_rate": fmt(self.accept.rate), "accept_low": fmt(self.accept.low), "accept_high": fmt(self.accept.high),
            "incorrect_accept_rate": fmt(self.incorrect_accept.rate),
            "incorrect_accept_low": fmt(self.incorrect_accept.low),
            "incorrect_accept_high": fmt(self.incorrect_accept.high),
            "metric": self.metric, "measured": fmt(self.measured), "op": self.op, "bound": fmt(self.bound),
            "bound_ref": self.bound_ref, "verdict": self.verdict, "method": self.accept.method,
        }


def check_bound(measured: float, bound: Mapping, trials: int, k: float = 4.0) -> bool:
    """Bound test with k-sigma slack, sigma taken at the bound value."""
    if bound["op"] == "<=":
        return stats.below_bound(measured, float(bound["value"]), trials, k)
    return stats.below_bound(1 - measured, 1 - float(bound["value"]), trials, k)


def _run_trial(cfg: ExperimentConfig, inst: Mapping, trial: int) -> ProtocolOutcome:
    rng = trial_rng(cfg.seed, trial)
    p = cfg.protocol
    if p == "mo":
        prover = recvmeas.MOProver(cfg.adversary, mode=inst["mode"])
        return recvmeas.mo_run(inst["graph"], inst["pattern"], inst["k"], prover, rng, seed=cfg.seed)
    if p == "posthoc":
        prover = recvmeas.PosthocProver(cfg.adversary, mode=inst["mode"])
        return recvmeas.posthoc_run(inst["gates"], inst["x"], prover, inst["repetitions"], rng, seed=cfg.seed,
                                    hamiltonian=inst["hamiltonian"])
    prover = make_prover(p, cfg.adversary)
    return prepsend.run_protocol(p, inst, prover, rng, seed=cfg.seed)


def run_experiment(cfg: ExperimentConfig, transcript_sink: Callable[[str], None] | None = None,
                   reveal: bool = False) -> SummaryRow:
    """Run every trial of one config; transcripts go to ``transcript_sink`` line by line."""
    inst = build_instance(cfg)
    attack = json.dumps(cfg.adversary.to_dict(), sort_keys=True)
    if cfg.protocol == "chsh":
        rng = trial_rng(cfg.seed, 0)
        res = entbased.chsh_campaign(inst["strategy"], cfg.trials, rng, keep_records=transcript_sink is not None)
        if transcript_sink is not None:
            transcript_sink(json.dumps({"header": {"protocol": "chsh", "seed": cfg.seed}}, sort_keys=True))
            for i, rec in enumerate(res.records):
                transcript_sink(json.dumps({"game": i, **rec.to_dict()}, sort_keys=True))
        accept = res.estimate
        row = SummaryRow(cfg.id, "chsh", attack, cfg.trials, accept, stats.wilson(0, cfg.trials))
        measured = res.rate
    else:
        acc = bad = 0
        if cfg.adversary.kind != "honest" and cfg.protocol not in ("mo", "posthoc"):
            make_prover(cfg.protocol, cfg.adversary)  # reject incompatible attacks before any trial
        for t in range(cfg.trials):
            out = _run_trial(cfg, inst, t)
            acc += out.accepted
            bad += out.incorrect_and_accepted
            if transcript_sink is not None:
                for line in out.transcript.lines(reveal):
                    transcript_sink(line)
        row = SummaryRow(cfg.id, cfg.protocol, attack, cfg.trials, stats.wilson(acc, cfg.trials),
                         stats.wilson(bad, cfg.trials))
        measured = None
    bound = cfg.bound or default_bound(cfg, inst)
    if bound is not None:
        if measured is None:
            measured = (row.accept if bound["metric"] == "accept" else row.incorrect_accept).rate
        row.metric, row.measured, row.op = bound["metric"], measured, bound["op"]
        row.bound, row.bound_ref = float(bound["value"]), bound.get("ref", "")
        row.verdict = "PASS" if check_bound(measured, bound, cfg.trials) else "FAIL"
    return row


def write_summary(rows: Sequence[SummaryRow], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r.to_csv())


def run(configs: Sequence[ExperimentConfig], out: Path, reveal: bool = False) -> list[SummaryRow]:
    (out / "transcripts").mkdir(parents=True, exist_ok=True)
    rows = []
    for cfg in configs:
        path = out / "transcripts" / f"{cfg.id}.jsonl"
        with path.open("w") as fh:
            rows.append(run_experiment(cfg, lambda line: fh.write(line + "\n"), reveal))
    write_summary(rows, out / "summary.csv")
    return rows


# ---------------------------------------------------------------- lemma checks


@dataclass(frozen=True)
class LemmaResult:
    name: str
    passed: bool
    value: float
    target: str

    def line(self) -> str:
        return f"{self.name}: {'PASS' if self.passed else 'FAIL'} ({self.target}; got {self.value:.3e})"


def _lemma_clifford_twirl(rng) -> LemmaResult:
    from .pauli import all_paulis, twirl_average

    worst = 0.0
    rho1 = qsim.random_density(1, rng).matrix
    paulis1 = list(all_paulis(1))
    for p1 in paulis1:
        for p2 in paulis1:
            if p1.letters() != p2.letters():
                worst = max(worst, float(np.abs(twirl_average(rho1, p1, p2, "clifford")).max()))
    paulis2 = list(all_paulis(2))
    rho2 = qsim.random_density(2, rng).matrix
    for _ in range(100):
        i, j = rng.choice(len(paulis2), size=2, replace=False)
        worst = max(worst, float(np.abs(twirl_average(rho2, paulis2[i], paulis2[j], "clifford")).max()))
    return LemmaResult("clifford-twirl", worst < 1e-10, worst, "off-diagonal twirl residual < 1e-10")


def _lemma_pauli_twirl(rng) -> LemmaResult:
    from .pauli import all_paulis, twirl_average

    worst = 0.0
    for n in (1, 2):
        rho = qsim.random_density(n, rng).matrix
        ps = list(all_paulis(n))
        for p1 in ps:
            for p2 in ps:
                if p1.letters() != p2.letters():
                    worst = max(worst, float(np.abs(twirl_average(rho, p1, p2, "pauli")).max()))
    return LemmaResult("pauli-twirl", worst < 1e-10, worst, "off-diagonal twirl residual < 1e-10")


def _lemma_otp(rng) -> LemmaResult:
    worst = 0.0
    for n in (1, 2, 3):
        rho = qsim.random_density(n, rng)
        avg = qsim.one_time_pad_average(rho)
        worst = max(worst, float(np.abs(avg - np.eye(2**n) / 2**n).max()))
    return LemmaResult("otp-identity", worst < 1e-12, worst, "pad average equals I/2^n within 1e-12")


def _lemma_signed_poly(rng) -> LemmaResult:
    from . import codes
    from .pauli import QuditPauli

    code = codes.SignedPolynomialCode(q=5, d=1)
    worst = 0.0
    for pos in range(3):
        for x in range(5):
            for z in range(5):
                if x == z == 0:
                    continue
                attack = QuditPauli.single(5, 3, pos, x, z)
                worst = max(worst, codes.signed_poly_auth_experiment(code, attack))
    return LemmaResult("signed-poly-security", worst <= 0.25 + 1e-9, worst, "single-qudit accept-and-incorrect <= 1/4")


def _lemma_rotated_sum(rng) -> LemmaResult:
    from . import codes

    worst = 0.0
    for _ in range(5):
        cw = codes.FIVE_QUBIT.random_codeword(rng)
        worst = max(worst, abs(codes.rotated_generator_sum(cw) - 4 * np.sqrt(2)))
    return LemmaResult("rotated-sum", worst < 1e-9, worst, "|sum - 4 sqrt2| < 1e-9 on codewords")


def _lemma_kv(rng) -> LemmaResult:
    worst = 0.0
    for g in (mbqc.Graph.path(4), mbqc.Graph.cycle(4), mbqc.Graph.from_edges([(0, 1), (1, 2), (1, 3), (3, 4)])):
        gs = mbqc.build_graph_state(g)
        worst = max(worst, max(mbqc.stabilizer_residuals(gs)))
        for group in ("XZ", "ZX"):
            bases = recvmeas.checkerboard(g, group)
            for _ in range(20):
                bits = recvmeas.measure_in_bases(gs.state, g, bases, rng)
                vals = recvmeas.infer_kv_outcomes(g, bits, bases).values()
                worst = max(worst, float(sum(v != 1 for v in vals)))
    return LemmaResult("kv-stabilizers", worst < 1e-10, worst, "K_v|G> = |G> and every inferred K_v = +1")


LEMMAS: dict[str, Callable] = {
    "clifford-twirl": _lemma_clifford_twirl,
    "pauli-twirl": _lemma_pauli_twirl,
    "otp-identity": _lemma_otp,
    "signed-poly-security": _lemma_signed_poly,
    "rotated-sum": _lemma_rotated_sum,
    "kv-stabilizers": _lemma_kv,
}


def lemma_check(name: str, seed: int = 0) -> LemmaResult:
    if name not in LEMMAS:
        raise ConfigError(f"unknown lemma {name!r}; choose from {sorted(LEMMAS)}")
    return LEMMAS[name](np.random.default_rng(seed))


# ---------------------------------------------------------------- report


def read_summaries(paths: Sequence[str | Path]) -> list[dict]:
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files += sorted(p.rglob("summary.csv"))
        elif p.is_file():
            files.append(p)
        else:
            raise ConfigError(f"{p} does not exist")
    if not files:
        raise ConfigError("no summary files found")
    rows = []
    for f in files:
        with f.open(newline="") as fh:
            rows += list(csv.DictReader(fh))
    if not rows:
        raise ConfigError("summary files are empty")
    return rows


def evaluate_row(row: Mapping) -> tuple[str, float | None]:
    """Verdict and margin (bound minus measured, sign-adjusted) for one summary row."""
    if not row.get("bound"):
        return "NA", None
    measured, bound, trials = float(row["measured"]), float(row["bound"]), int(row["trials"])
    spec = {"op": row["op"], "value": bound}
    margin = bound - measured if row["op"] == "<=" else measured - bound
    return ("PASS" if check_bound(measured, spec, trials) else "FAIL"), margin


def report(paths: Sequence[str | Path]) -> tuple[str, bool]:
    rows = read_summaries(paths)
    lines = [f"{'experiment':<24} {'metric':<17} {'measured':>9} {'bound':>12} {'margin':>9}  verdict"]
    ok = True
    for r in rows:
        verdict, margin = evaluate_row(r)
        ok &= verdict != "FAIL"
        bound = f"{r['op']} {float(r['bound']):.4f}" if r.get("bound") else "-"
        measured = f"{float(r['measured']):.4f}" if r.get("measured") else "-"
        m = f"{margin:+.4f}" if margin is not None else "-"
        lines.append(f"{r['id']:<24} {r.get('metric') or '-':<17} {measured:>9} {bound:>12} {m:>9}  {verdict}")
    return "\n".join(lines), ok


# ---------------------------------------------------------------- CLI


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vqlab", description="Verification-protocol simulation lab.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run experiment configs")
    r.add_argument("configs", nargs="+", help="JSON config files")
    r.add_argument("--seed", type=int, help="override every config's seed")
    r.add_argument("--trials", type=int, help="override every config's trial count")
    r.add_argument("--assert-bounds", action="store_true", help="exit 1 if any bound check fails")
    r.add_argument("--reveal", action="store_true", help="append hidden verifier parameters to transcripts")
    r.add_argument("--out", default="out", help="output directory (default: out)")

    lc = sub.add_parser("lemma-check", help="exact verification of a lemma")
    lc.add_argument("names", nargs="+", choices=sorted(LEMMAS) + ["all"])
    lc.add_argument("--seed", type=int, default=0)
    lc.add_argument("--out", help="also write results as JSON into this directory")

    rp = sub.add_parser("report", help="compare summary rows with their bounds")
    rp.add_argument("paths", nargs="+", help="summary.csv files or directories holding them")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        if args.command == "run":
            if args.seed is not None and args.seed < 0:
                raise ConfigError("seed must be nonnegative")
            configs = [load_config(p).with_overrides(args.seed, args.trials) for p in args.configs]
            ids = [c.id for c in configs]
            if len(set(ids)) != len(ids):
                raise ConfigError("experiment ids must be unique")
            rows = run(configs, Path(args.out), args.reveal)
            for row in rows:
                print(f"{row.id}: accept {row.accept.rate:.4f}, incorrect-and-accept "
                      f"{row.incorrect_accept.rate:.4f}, {row.verdict}")
            if args.assert_bounds and any(r.verdict == "FAIL" for r in rows):
                return 1
            return 0
        if args.command == "lemma-check":
            names = sorted(LEMMAS) if "all" in args.names else args.names
            results = [lemma_check(n, args.seed) for n in names]
            for res in results:
                print(res.line())
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                payload = [{"name": r.name, "passed": r.passed, "value": r.value, "target": r.target} for r in results]
                (Path(args.out) / "lemmas.json").write_text(json.dumps(payload, indent=2) + "\n")
            return 0 if all(r.passed for r in results) else 1
        if args.command == "report":
            text, ok = report(args.paths)
            print(text)
            return 0 if ok else 1
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
