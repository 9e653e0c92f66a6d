"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import sys
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import container
from .dictionaries import Dictionary, _code_all, learn_mod, make_db10, make_dct
from .keys import (
    KeyGenerationError,
    frobenius_distance,
    gen_bipolar,
    gen_matrix_key,
    identity_bipolar,
    identity_matrix_key,
    make_estimated_key,
    permute_columns,
)
from .metrics import QualityReport, quality
from .protocol import (
    RecoveryWarning,
    cloud_recover,
    encrypt_operator,
    sensor_encode,
    user_decrypt,
)
from .sensing import make_dbbd_phi, make_gaussian_phi, mutual_coherence
from .signal_io import SignalFormatError, load_ecg, window
from .solvers import SolverError, SolverParams

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    n: int = 0
    m: int = 0
    dictionary: str = ""
    levels: int = 0
    phi: str = ""
    solver: str = ""
    max_sparsity: int | None = None
    alpha: float | None = None
    seeds: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    r_list: list = field(default_factory=list)

    def header_lines(self) -> list[str]:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, dict):
                value = ",".join(f"{k}:{v}" for k, v in sorted(value.items()))
            elif isinstance(value, list):
                value = ",".join(str(v) for v in value)
            if value in (None, "", 0):
                continue
            lines.append(f"# {f.name}={value}")
        if self.n and self.m:
            lines.append(f"# cr={_num(self.m / self.n)}")
            lines.append(f"# n_over_m={_num(self.n / self.m)}")
        return lines


def write_csv(path: Path, config: ExperimentConfig, header, rows) -> None:
    buf = io.StringIO()
    for line in config.header_lines():
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _num(v) -> str:
    return repr(float(v))


def fingerprint(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()[:8]


def _resolve_m(args) -> int:
    if getattr(args, "cr", None) is not None:
        if args.m is not None:
            raise UsageError("give either --m or --cr, not both")
        m = args.n * args.cr
        if abs(m - round(m)) > 1e-9:
            raise UsageError(f"--cr {args.cr} does not give an integer m for n={args.n}")
        return int(round(m))
    if args.m is None:
        raise UsageError("--m or --cr is required")
    return args.m


def _dictionary(source: str, n: int, levels: int) -> Dictionary:
    if source == "dct":
        return make_dct(n)
    if source == "db10":
        return make_db10(n, levels)
    d = container.load(source)
    if not isinstance(d, Dictionary):
        raise ValueError(f"{source} does not hold a dictionary")
    if d.n != n:
        raise ValueError(f"dictionary {source} has {d.n} rows, windows have {n} samples")
    return d


def _phi(kind: str, m: int, n: int, seed):
    if kind == "dbbd":
        return make_dbbd_phi(m, n)
    if seed is None:
        raise UsageError("--phi-seed is required for a gaussian measurement matrix")
    return make_gaussian_phi(m, n, seed)


def _positive(value):
    v = float(value)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _column(value):
    return int(value) if value.lstrip("-").isdigit() else value


def _percent(value):
    v = float(value)
    if not 0 <= v <= 100:
        raise argparse.ArgumentTypeError("must lie in [0, 100]")
    return v


def _check_writable(paths, force: bool):
    for p in paths:
        if p.exists() and not force:
            raise UsageError(f"{p} exists (use --force to overwrite)")


def _load_windows(args, n: int):
    out = []
    for path in args.input:
        rec = load_ecg(path, column=args.column, rate=args.rate)
        out.append((rec.origin, window(rec, n, pad=args.pad)))
    return out


def _keys(args, m: int, l: int):
    if getattr(args, "plain", False):
        return identity_matrix_key(m), identity_bipolar(l, args.alpha)
    if args.q_key and args.p_key:
        q, p = container.load(args.q_key), container.load(args.p_key)
    elif args.q_seed is not None and args.p_seed is not None:
        q, p = gen_matrix_key(m, args.q_seed), gen_bipolar(l, args.alpha, args.p_seed)
    else:
        raise UsageError("provide --q-key/--p-key files or --q-seed/--p-seed")
    if q.m != m or p.n != l:
        raise ValueError(f"key sizes Q={q.m}, P={p.n} do not match m={m}, atoms={l}")
    return q, p


def _solver_params(args) -> SolverParams:
    return SolverParams(max_sparsity=args.max_sparsity, residual_tol=args.residual_tol)


# -- subcommands ------------------------------------------------------------


def cmd_keygen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    q_path, p_path = out / "q.pacs", out / "p.pacs"
    _check_writable([q_path, p_path], args.force)
    q = gen_matrix_key(args.m, args.seed)
    p = gen_bipolar(args.n, args.alpha, args.seed + 1)
    for path, key in ((q_path, q), (p_path, p)):
        blob = container.save(path, key)
        print(f"{path.name} {fingerprint(blob)}")
    return EXIT_OK


def cmd_sense(args) -> int:
    m = _resolve_m(args)
    phi = _phi(args.phi, m, args.n, args.phi_seed)
    psi = _dictionary(args.dict, args.n, args.levels)
    q, p = _keys(args, m, psi.atoms)
    a_star = encrypt_operator(phi, psi, q, p)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for origin, windows in _load_windows(args, args.n):
        for i, w in enumerate(windows):
            path = out / f"{origin}_w{i:04d}.cipher.pacs"
            _check_writable([path], args.force)
            container.save(path, sensor_encode(w, phi, psi, q, p, a_star=a_star))
            print(path)
    return EXIT_OK


def cmd_recover(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.input:
        pkg = container.load(name)
        stem = Path(name).name.replace(".cipher.pacs", "").replace(".pacs", "")
        path = out / f"{stem}.ic.pacs"
        _check_writable([path], args.force)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RecoveryWarning)
            ic = cloud_recover(pkg, args.solver, _solver_params(args))
        container.save(path, ic)
        flag = " (tolerance not met)" if caught else ""
        print(f"{path} residual={ic.residual_norm:.3e}{flag}")
    return EXIT_OK


def cmd_decrypt(args) -> int:
    p = container.load(args.p_key)
    key = make_estimated_key(p, args.wrong_key, args.attack_seed) if args.wrong_key is not None else p
    rows = []
    for name in args.input:
        ic = container.load(name)
        psi = _dictionary(args.dict, ic.coeffs.size, args.levels)
        x = user_decrypt(ic, key, psi)
        rows.extend([Path(name).name, i, _num(v)] for i, v in enumerate(x.samples))
    config = ExperimentConfig("decrypt", dictionary=args.dict, levels=args.levels,
                              seeds={"attack": args.attack_seed} if args.wrong_key is not None else {},
                              records=list(args.input),
                              r_list=[args.wrong_key] if args.wrong_key is not None else [])
    write_csv(Path(args.out), config, ["cipher", "sample", "value"], rows)
    return EXIT_OK


def _pipeline_config(args, m, command, q, p):
    config = ExperimentConfig(
        command=command,
        n=args.n,
        m=m,
        dictionary=args.dict,
        levels=args.levels,
        phi=args.phi,
        solver=args.solver,
        max_sparsity=args.max_sparsity,
        alpha=args.alpha,
        seeds={k: v for k, v in (("phi", args.phi_seed), ("q", args.q_seed), ("p", args.p_seed),
                                 ("attack", getattr(args, "attack_seed", None))) if v is not None},
        records=[str(path) for path in args.input],
    )
    if getattr(args, "plain", False):
        config.seeds["keys"] = "identity"
    else:
        config.seeds["q"], config.seeds["p"] = q.seed, p.seed
    return config


def cmd_pipeline(args) -> int:
    m = _resolve_m(args)
    phi = _phi(args.phi, m, args.n, args.phi_seed)
    psi = _dictionary(args.dict, args.n, args.levels)
    q, p = _keys(args, m, psi.atoms)
    if args.plain:
        suffix = "_plain"
    elif args.wrong_key is not None:
        suffix = f"_wrongkey_r{args.wrong_key:g}_s{args.attack_seed}"
    else:
        suffix = ""
    decrypt_key = p
    if args.wrong_key is not None:
        decrypt_key = make_estimated_key(p, args.wrong_key, args.attack_seed)
    config = _pipeline_config(args, m, "pipeline", q, p)
    if args.wrong_key is not None:
        config.r_list = [args.wrong_key]
    a_star = encrypt_operator(phi, psi, q, p)
    params = _solver_params(args)
    recon_rows, quality_rows = [], []
    for origin, windows in _load_windows(args, args.n):
        for i, w in enumerate(windows):
            pkg = sensor_encode(w, phi, psi, q, p, a_star=a_star)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RecoveryWarning)
                ic = cloud_recover(pkg, args.solver, params)
            x = user_decrypt(ic, decrypt_key, psi)
            recon_rows.extend([origin, i, j, _num(a), _num(b)] for j, (a, b) in enumerate(zip(w.samples, x.samples)))
            quality_rows.append(quality(w, x).csv_row(f"{origin}:{i}"))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / f"recon{suffix}.csv", config, ["record", "window", "sample", "original", "reconstructed"], recon_rows)
    write_csv(out / f"quality{suffix}.csv", config, list(QualityReport.CSV_HEADER), quality_rows)
    for row in quality_rows:
        print(f"{row[0]} prd={float(row[1]):.3f}% snr={float(row[3]):.2f}dB {row[4]}")
    return EXIT_OK


def cmd_attack(args) -> int:
    m = _resolve_m(args)
    phi = _phi(args.phi, m, args.n, args.phi_seed)
    psi = _dictionary(args.dict, args.n, args.levels)
    q, p = _keys(args, m, psi.atoms)
    a_star = encrypt_operator(phi, psi, q, p)
    r_list = sorted(set(args.r), reverse=True)
    estimates = {
        (r, s): make_estimated_key(p, r, s) for r in r_list for s in args.attack_seeds
    }
    distances = {k: frobenius_distance(p, e) for k, e in estimates.items()}
    params = _solver_params(args)
    rows = []
    for origin, windows in _load_windows(args, args.n):
        for i, w in enumerate(windows):
            pkg = sensor_encode(w, phi, psi, q, p, a_star=a_star)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RecoveryWarning)
                ic = cloud_recover(pkg, args.solver, params)
            base = quality(w, user_decrypt(ic, p, psi))
            rows.append([origin, i, "P", "100", "", _num(0.0), _num(base.prd), _num(base.prdn), base.quality])
            for r in r_list:
                for s in args.attack_seeds:
                    rep = quality(w, user_decrypt(ic, estimates[r, s], psi))
                    rows.append([origin, i, f"E{r:g}", f"{r:g}", s, _num(distances[r, s]),
                                 _num(rep.prd), _num(rep.prdn), rep.quality])
    config = _pipeline_config(args, m, "attack", q, p)
    config.seeds["attack"] = ",".join(str(s) for s in args.attack_seeds)
    config.r_list = r_list
    write_csv(Path(args.out), config,
              ["record", "window", "key", "r", "attack_seed", "frobenius", "prd", "prdn", "band"], rows)
    return EXIT_OK


def _parse_m_values(args) -> list[int]:
    if args.m_range:
        try:
            start, stop, step = (int(v) for v in args.m_range.split(":"))
        except ValueError:
            raise UsageError("--m-range must look like start:stop:step") from None
        return list(range(start, stop + 1, step))
    if not args.m:
        raise UsageError("--m or --m-range is required")
    return list(args.m)


def cmd_coherence(args) -> int:
    n = args.n
    psi = _dictionary(args.dict, n, args.levels)
    keys = [gen_bipolar(psi.atoms, args.alpha, args.p_seed + i) for i in range(args.p_count)]
    rows = []
    for m in _parse_m_values(args):
        if not 0 < m <= n:
            raise UsageError(f"m={m} outside (0, {n}]")
        for kind in args.phi_kinds:
            if kind == "dbbd" and n % m:
                print(f"skipping dbbd at m={m}: {m} does not divide {n}", file=sys.stderr)
                continue
            phi = make_dbbd_phi(m, n) if kind == "dbbd" else make_gaussian_phi(m, n, args.phi_seed, allow_square=True)
            plain = mutual_coherence(phi, psi)
            for key in keys:
                enc = mutual_coherence(phi, permute_columns(psi.matrix, key))
                rows.append([m, kind, key.seed, _num(plain), _num(enc)])
    config = ExperimentConfig("coherence", n=n, dictionary=args.dict, levels=args.levels, alpha=args.alpha,
                              seeds={"phi": args.phi_seed, "p": args.p_seed})
    config.r_list = []
    write_csv(Path(args.out), config, ["m", "phi", "p_seed", "mu_plain", "mu_encrypted"], rows)
    return EXIT_OK


def cmd_learn_dict(args) -> int:
    out = Path(args.out)
    _check_writable([out], args.force)
    training = [w for _, ws in _load_windows(args, args.n) for w in ws]
    atoms = args.atoms or args.n
    d, errors = learn_mod(training, atoms, args.sparsity, args.iters, args.seed, return_errors=True)
    blob = container.save(out, d)
    for i, e in enumerate(errors):
        print(f"iter {i} error {e:.6e}")
    if errors:
        final = errors[-1]
    else:
        x = np.column_stack([w.samples for w in training])
        final = float(np.sum((x - d.matrix @ _code_all(d.matrix, x, args.sparsity)) ** 2))
    print(f"final representation error {final:.6e}")
    print(f"{out.name} {fingerprint(blob)}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    orig = load_ecg(args.original, column=args.column)
    recon = load_ecg(args.reconstructed, column=args.recon_column)
    if orig.samples.size != recon.samples.size:
        raise ValueError(f"length mismatch: {orig.samples.size} vs {recon.samples.size}")
    n = args.n or orig.samples.size
    rows = []
    for i, (a, b) in enumerate(zip(window(orig.samples, n), window(recon.samples, n))):
        rows.append(quality(a, b).csv_row(f"{orig.origin}:{i}"))
    config = ExperimentConfig("metrics", n=n, records=[str(args.original), str(args.reconstructed)])
    if args.out:
        write_csv(Path(args.out), config, list(QualityReport.CSV_HEADER), rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(QualityReport.CSV_HEADER)
        w.writerows(rows)
    return EXIT_OK


# -- parser -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_input(p, required=True):
    p.add_argument("--input", nargs="+", required=required, help="ECG text files")
    p.add_argument("--column", type=_column, default=0, help="index or CSV column name")
    p.add_argument("--rate", type=_positive, default=None, help="override the file's sample rate")
    p.add_argument("--pad", choices=("drop", "zero"), default="drop")


def _add_model(p, need_keys=True):
    p.add_argument("--n", type=int, required=True, help="window length N")
    p.add_argument("--m", type=int, help="measurements M")
    p.add_argument("--cr", type=float, help="M/N ratio (alternative to --m)")
    p.add_argument("--dict", default="dct", help="dct, db10, or a dictionary .pacs file")
    p.add_argument("--levels", type=int, default=4, help="db10 decomposition depth")
    p.add_argument("--phi", choices=("gaussian", "dbbd"), default="gaussian")
    p.add_argument("--phi-seed", type=int)
    if need_keys:
        p.add_argument("--q-key")
        p.add_argument("--p-key")
        p.add_argument("--q-seed", type=int)
        p.add_argument("--p-seed", type=int)
        p.add_argument("--alpha", type=_positive, default=1.0)


def _add_solver(p):
    p.add_argument("--solver", choices=("omp", "sl0"), default="omp")
    p.add_argument("--max-sparsity", type=int, default=None)
    p.add_argument("--residual-tol", type=_positive, default=1e-10)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ppcs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("keygen", help="generate the matrix key Q and bipolar key P")
    p.add_argument("--n", type=int, required=True, help="size of P (dictionary atoms)")
    p.add_argument("--m", type=int, required=True, help="size of Q (measurements)")
    p.add_argument("--alpha", type=_positive, required=True)
    p.add_argument("--seed", type=int, required=True, help="Q uses seed, P uses seed+1")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("sense", help="compress and encrypt windows into cipher packages")
    _add_input(p)
    _add_model(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("recover", help="cloud-side recovery of intermediate ciphers")
    p.add_argument("--input", nargs="+", required=True, help="cipher .pacs files")
    _add_solver(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("decrypt", help="user-side decryption to a reconstruction CSV")
    p.add_argument("--input", nargs="+", required=True, help="intermediate .pacs files")
    p.add_argument("--p-key", required=True)
    p.add_argument("--dict", default="dct")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--wrong-key", type=_percent, help="decrypt with an estimated key sharing r%% of columns")
    p.add_argument("--attack-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("pipeline", help="sense, recover and decrypt; writes reconstruction and quality CSVs")
    _add_input(p)
    _add_model(p)
    _add_solver(p)
    p.add_argument("--plain", action="store_true", help="identity keys (ordinary CS baseline)")
    p.add_argument("--wrong-key", type=_percent)
    p.add_argument("--attack-seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("attack", help="decrypt with estimated keys at several similarity levels")
    _add_input(p)
    _add_model(p)
    _add_solver(p)
    p.add_argument("--r", type=_percent, nargs="+", required=True)
    p.add_argument("--attack-seeds", type=int, nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("coherence", help="mutual coherence with and without the bipolar key")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, nargs="+")
    p.add_argument("--m-range", help="start:stop:step (inclusive)")
    p.add_argument("--phi-kinds", nargs="+", choices=("gaussian", "dbbd"), default=["gaussian", "dbbd"])
    p.add_argument("--dict", default="dct")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--phi-seed", type=int, required=True)
    p.add_argument("--p-seed", type=int, required=True)
    p.add_argument("--p-count", type=int, default=1)
    p.add_argument("--alpha", type=_positive, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("learn-dict", help="learn a dictionary with MOD")
    _add_input(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--atoms", type=int, default=None, help="defaults to N")
    p.add_argument("--sparsity", type=int, required=True)
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_learn_dict)

    p = sub.add_parser("metrics", help="PRD / PRDN / SNR between two signals")
    p.add_argument("--original", required=True)
    p.add_argument("--reconstructed", required=True)
    p.add_argument("--column", type=_column, default=0, help="index or CSV column name")
    p.add_argument("--recon-column", type=_column, default=0, help="index or CSV column name")
    p.add_argument("--n", type=int, default=None, help="window length (default: whole signal)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ppcs {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, KeyGenerationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"ppcs {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SignalFormatError, container.ContainerError, OSError, ValueError) as exc:
        print(f"ppcs {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
