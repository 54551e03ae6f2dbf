"""Command-line entry point: ``qsimnet <subcommand> ...``.

Exit status is 1 for usage errors and 2 for runtime errors.  Statistical
checks that fail are reported with ``"pass": false`` and exit 0.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import subprocess
import sys
import time
import uuid
from pathlib import Path

import numpy as np

from . import engine, oracle
from .circuit import Circuit, GridSpec, generate_random_circuit, parse_grcs, render_grcs
from .distributor import DirectoryStore, RunConfig, TaskManifest, run_agent, run_worker
from .distributor.store import STORE_DIR_ENV
from .planner import DEFAULT_MAX_LOG2_SIZE, estimate_cost
from .stats_bench import BenchRecord, emit_report, extrapolate_runtime, porter_thomas_report
from .tensor_network import Bitstring

log = logging.getLogger("qsimnet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_circuit(p):
    g = p.add_argument_group("circuit source (file, or grid + depth + seed)")
    g.add_argument("--circuit", help="GRCS circuit file")
    g.add_argument("--rows", type=int)
    g.add_argument("--cols", type=int)
    g.add_argument("--depth", type=int, help="number of inner CZ layers t")
    g.add_argument("--seed", type=int, default=0, help="circuit generator seed")


def _add_outputs(p):
    g = p.add_argument_group("output bitstrings")
    g.add_argument("--bitstrings", nargs="+", help="explicit bitstrings, qubit 0 first")
    g.add_argument("--bitstring-file", help="file with one bitstring per line")
    g.add_argument("--count", type=int, help="number of random bitstrings")
    g.add_argument("--output-seed", type=int, default=0)


def _add_plan(p):
    p.add_argument("--max-log2-size", type=int, default=DEFAULT_MAX_LOG2_SIZE,
                   help="per-subtask memory cap, log2 of tensor entries")
    p.add_argument("--plan-seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qsimnet", description="Sliced tensor-network amplitudes of random circuits")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="emit a random circuit as GRCS text")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out")

    p = sub.add_parser("plan", help="print the cost report of a sliced contraction plan")
    _add_circuit(p)
    _add_plan(p)
    p.add_argument("--save", help="write the slice plan JSON here")

    p = sub.add_parser("simulate", help="compute amplitudes locally (JSON lines)")
    _add_circuit(p)
    _add_outputs(p)
    _add_plan(p)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--backend", choices=("thread", "process"), default="thread")

    p = sub.add_parser("serve-worker", help="process units from an object store")
    p.add_argument("--store", default=os.environ.get(STORE_DIR_ENV))
    p.add_argument("--worker-id", default=None)
    p.add_argument("--wait-s", type=float, default=0.0, help="keep polling while idle this long")
    p.add_argument("--poll-ms", type=int, default=50)
    p.add_argument("--subtask-delay-s", type=float, default=0.0, help=argparse.SUPPRESS)

    p = sub.add_parser("run-distributed", help="agent + worker processes over a directory store")
    _add_circuit(p)
    _add_outputs(p)
    _add_plan(p)
    p.add_argument("--store", default=os.environ.get(STORE_DIR_ENV))
    p.add_argument("--workers", type=int, default=2)
    p.add_argument("--no-spawn", action="store_true", help="only publish and poll; workers run elsewhere")
    p.add_argument("--mode", choices=("claim", "push"), default="claim")
    p.add_argument("--poll-ms", type=int, default=50)
    p.add_argument("--timeout-s", type=float, default=600.0)
    p.add_argument("--task-id")

    p = sub.add_parser("verify", help="compare engine amplitudes with the state-vector oracle")
    _add_circuit(p)
    _add_plan(p)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--output-seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-10)

    p = sub.add_parser("bench", help="timing records and a Porter-Thomas report")
    _add_circuit(p)
    _add_plan(p)
    p.add_argument("--amplitudes", type=int, default=256)
    p.add_argument("--workers", type=int, default=8)
    p.add_argument("--pt-samples", type=int, default=2000)
    p.add_argument("--output-seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--report", default="bench", help="report path prefix")
    return parser


def load_circuit(args) -> Circuit:
    grid = (args.rows, args.cols, args.depth)
    if args.circuit and any(v is not None for v in grid):
        raise UsageError("give either --circuit or --rows/--cols/--depth, not both")
    if args.circuit:
        return parse_grcs(Path(args.circuit).read_text())
    if any(v is None for v in grid):
        raise UsageError("need --circuit or all of --rows, --cols, --depth")
    return generate_random_circuit(GridSpec(args.rows, args.cols), args.depth, args.seed)


def random_bitstrings(n: int, count: int, seed: int) -> list[Bitstring]:
    bits = np.random.Generator(np.random.PCG64(seed)).integers(0, 2, size=(count, n))
    return [Bitstring(tuple(row)) for row in bits]


def load_outputs(args, n: int) -> list[Bitstring]:
    given = [args.bitstrings is not None, args.bitstring_file is not None, args.count is not None]
    if sum(given) != 1:
        raise UsageError("give exactly one of --bitstrings, --bitstring-file, --count")
    if args.count is not None:
        return random_bitstrings(n, args.count, args.output_seed)
    if args.bitstrings is not None:
        lines = args.bitstrings
    else:
        text = Path(args.bitstring_file).read_text().splitlines()
        lines = [l.strip() for l in text if l.strip() and not l.lstrip().startswith("#")]
    try:
        out = [Bitstring.from_str(s) for s in lines]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if any(b.n != n for b in out):
        raise UsageError(f"bitstrings must have {n} bits")
    return out


def _prepare(args, circuit):
    t0 = time.perf_counter()
    tpl = engine.NetworkTemplate(circuit)
    sp = tpl.plan(args.max_log2_size, args.plan_seed, args.restarts)
    return tpl, sp, time.perf_counter() - t0


def _emit(obj, out=None):
    print(json.dumps(obj, sort_keys=True), file=out or sys.stdout, flush=True)


def cmd_generate(args):
    c = generate_random_circuit(GridSpec(args.rows, args.cols), args.depth, args.seed)
    text = render_grcs(c)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_plan(args):
    circuit = load_circuit(args)
    _, sp, pre = _prepare(args, circuit)
    report = estimate_cost(sp).to_dict()
    report["preprocessing_seconds"] = pre
    report["sliced_indices"] = list(sp.sliced_indices)
    if args.save:
        Path(args.save).write_text(sp.to_json())
    _emit(report)


def cmd_simulate(args):
    circuit = load_circuit(args)
    outputs = load_outputs(args, circuit.n_qubits)
    tpl, sp, pre = _prepare(args, circuit)
    log.info("preprocessing %.3f s, %d subtasks per amplitude", pre, sp.subtask_count)
    for r in engine.batch_amplitudes(tpl, sp, outputs, args.parallelism, args.backend):
        _emit(r.to_json_dict())


def cmd_serve_worker(args):
    store = DirectoryStore(args.store)
    wid = args.worker_id or f"{os.uname().nodename}-{os.getpid()}"
    n = run_worker(store, wid, args.wait_s, args.poll_ms, args.subtask_delay_s)
    log.info("worker %s processed %d units", wid, n)


def spawn_workers(store_root: str, n: int, wait_s: float = 2.0, extra: tuple[str, ...] = ()):
    return [
        subprocess.Popen([sys.executable, "-m", "qsimnet", "serve-worker", "--store", str(store_root),
                          "--worker-id", f"w{i}", "--wait-s", str(wait_s), *extra])
        for i in range(n)
    ]


def cmd_run_distributed(args):
    if not args.store:
        raise UsageError(f"--store or {STORE_DIR_ENV} is required")
    circuit = load_circuit(args)
    outputs = load_outputs(args, circuit.n_qubits)
    _, sp, pre = _prepare(args, circuit)
    log.info("preprocessing %.3f s, %d subtasks per amplitude", pre, sp.subtask_count)
    config = RunConfig(len(outputs), sp.subtask_count, args.workers, args.poll_ms, args.timeout_s, args.mode)
    task = args.task_id or uuid.uuid4().hex[:12]
    manifest = TaskManifest.create(task, render_grcs(circuit), [str(o) for o in outputs], sp, config)
    store = DirectoryStore(args.store)
    procs = [] if args.no_spawn else spawn_workers(args.store, args.workers)
    try:
        results = run_agent(manifest, store, config)
    finally:
        for p in procs:
            p.terminate()
            p.wait()
    for r in results:
        _emit(r.to_json_dict())


def cmd_verify(args):
    circuit = load_circuit(args)
    tpl, sp, _ = _prepare(args, circuit)
    sv = oracle.simulate(circuit)
    worst = 0.0
    for b in random_bitstrings(circuit.n_qubits, args.samples, args.output_seed):
        got = engine.amplitude(tpl.network(b), sp).amplitude
        ref = sv.amplitude(b)
        worst = max(worst, abs(got - ref) / max(abs(ref), 1e-300))
    _emit({"samples": args.samples, "max_relative_error": worst, "tolerance": args.tolerance,
           "subtask_count": sp.subtask_count, "pass": worst < args.tolerance})


def cmd_bench(args):
    circuit = load_circuit(args)
    tpl, sp, pre = _prepare(args, circuit)
    label = args.circuit or f"grid{args.rows}x{args.cols}-t{args.depth}-s{args.seed}"
    n = circuit.n_qubits
    outs = random_bitstrings(n, args.amplitudes, args.output_seed)
    single = engine.batch_amplitudes(tpl, sp, outs[:1])[0].wall_seconds
    serial = engine.batch_amplitudes(tpl, sp, outs)
    serial_total = serial[0].wall_seconds * len(outs)
    units = len(outs) * sp.subtask_count
    predicted = extrapolate_runtime([(1, serial_total, units)], units, args.workers)
    par = engine.batch_amplitudes(tpl, sp, outs, args.workers, "process")
    records = [
        BenchRecord(label, 1, sp.subtask_count, "1 worker", single, single),
        BenchRecord(label, len(outs), sp.subtask_count, "1 worker", serial[0].wall_seconds,
                    serial[0].wall_seconds),
        BenchRecord(label, len(outs), sp.subtask_count, f"{args.workers} workers",
                    par[0].wall_seconds, predicted / len(outs)),
    ]
    if n <= oracle.DEFAULT_MAX_QUBITS:
        probs = oracle.simulate(circuit).probabilities()
        pick = np.random.Generator(np.random.PCG64(args.output_seed)).choice(
            probs.size, size=min(args.pt_samples, probs.size), replace=False)
        sample = probs[pick]
    else:
        res = engine.batch_amplitudes(tpl, sp, random_bitstrings(n, args.pt_samples, args.output_seed))
        sample = np.array([abs(r.amplitude) ** 2 for r in res])
    pt = porter_thomas_report(sample, 2**n, args.threshold)
    files = emit_report(records, pt, args.report)
    _emit({"preprocessing_seconds": pre, "records": [r.__dict__ for r in records],
           "porter_thomas": pt.to_dict(), "files": files, "pass": pt.passed})


COMMANDS = {
    "generate": cmd_generate,
    "plan": cmd_plan,
    "simulate": cmd_simulate,
    "serve-worker": cmd_serve_worker,
    "run-distributed": cmd_run_distributed,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qsimnet: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"qsimnet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0
