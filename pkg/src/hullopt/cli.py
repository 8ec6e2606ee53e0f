"""Command-line client for the pipeline service.

Each subcommand maps to one endpoint of :mod:`hullopt.service`. By default
requests are served in-process; ``--server URL`` sends them to a running
service instead. Exit codes: 0 success, 1 domain, configuration or usage
error, 2 internal error.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

STAGES = ("init", "sample", "solve", "fit", "moo", "bo", "pds", "reparam", "run", "report", "crossval")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("run_dir", help="run directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--time-limit", type=float, help="wall-clock limit in seconds per search stage")
    common.add_argument("--max-iters", type=int, help="iteration budget per search stage")
    common.add_argument("--params-target", type=int, help="parameter count after reparameterization")
    common.add_argument("--json", action="store_true", help="print the result as JSON")
    common.add_argument("--server", metavar="URL", help="send the request to a running service")

    parser = _Parser(prog="hullopt", description="Surrogate-assisted hull thickness optimization")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "init": "create a run directory from a configuration file",
        "sample": "draw the initial random sample",
        "solve": "run high-fidelity solves on pending or given configurations",
        "fit": "fit the reduced-order surrogate",
        "moo": "genetic search with infill selection",
        "bo": "Bayesian optimization on the surrogate",
        "pds": "pattern direct search on the surrogate",
        "reparam": "refine the parameterization",
        "run": "run the full pipeline, resuming if possible",
        "report": "write the stage table, histories and plots",
        "crossval": "k-fold cross-validation of the surrogate per rank",
    }
    cmds = {name: sub.add_parser(name, parents=[common], help=helps[name]) for name in STAGES}
    cmds["init"].add_argument("--config", metavar="FILE", help="configuration YAML (default: demo)")
    cmds["init"].add_argument("--overwrite", action="store_true")
    cmds["run"].add_argument("--config", metavar="FILE", help="configuration YAML used if the run is new")
    cmds["run"].add_argument("--max-steps", type=int)
    cmds["sample"].add_argument("--count", type=int)
    cmds["solve"].add_argument("--configs", metavar="FILE",
                               help="JSON list of configurations (default: pending configurations)")
    cmds["crossval"].add_argument("--folds", type=int, default=5)
    cmds["crossval"].add_argument("--ranks", type=_int_list, help="comma separated ranks, e.g. 4,6,8")
    return parser


def _payload(args) -> dict:
    body = {"run_dir": str(Path(args.run_dir).resolve())}
    if args.command == "init":
        body["config_path"] = _abspath(args.config)
        body["overwrite"] = args.overwrite
        return body
    for key in ("seed", "time_limit", "max_iters", "params_target"):
        if getattr(args, key) is not None:
            body[key] = getattr(args, key)
    if args.command == "run":
        body["config_path"] = _abspath(args.config)
        body["max_steps"] = args.max_steps
    elif args.command == "sample":
        body["count"] = args.count
    elif args.command == "solve" and args.configs:
        body["configs"] = json.loads(Path(args.configs).read_text())
    elif args.command == "crossval":
        body["folds"] = args.folds
        body["ranks"] = args.ranks
    return body


def _abspath(path):
    return None if path is None else str(Path(path).resolve())


def _client(server: str | None):
    if server:
        import httpx
        return httpx.Client(base_url=server.rstrip("/"), timeout=None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # test client import warns about its httpx backend
        from fastapi.testclient import TestClient
    from .service import app
    return TestClient(app, raise_server_exceptions=False)


def _summary(command: str, result: dict) -> str:
    lines = [f"{command}: ok"]
    for key, value in result.items():
        if isinstance(value, (list, dict)):
            text = json.dumps(value)
            if len(text) > 100:
                text = text[:97] + "..."
        else:
            text = str(value)
        lines.append(f"  {key}: {text}")
    return "\n".join(lines)


def dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        body = _payload(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        with _client(args.server) as client:
            resp = client.post(f"/runs/{args.command}", json=body)
    except Exception as exc:  # transport failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    try:
        data = resp.json()
    except ValueError:
        data = {"error": "InvalidResponse", "detail": resp.text}
    if resp.status_code == 200:
        print(json.dumps(data, indent=2) if args.json else _summary(args.command, data["result"]))
        return 0
    if args.json:
        print(json.dumps(data, indent=2))
    detail = data.get("detail", data)
    print(f"error: {data.get('error', resp.status_code)}: {detail}", file=sys.stderr)
    return 1 if resp.status_code < 500 else 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
