"""Command-line front end.

``pedeval evaluate|categorize|validate --config run.json`` build the same
request the HTTP API takes and either call the service handlers in
process (default) or POST to a running server (``--server URL``, where the
input paths are resolved on the server).  Returned artifacts are written
verbatim under the config's output directory, so local and remote runs
produce identical files.

Exit codes: 0 success, 1 malformed or inconsistent input data, 2 unusable
configuration.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import load_config
from .errors import ConfigError, PedevalError
from .service import (CategorizeResponse, EvaluateRequest, EvaluateResponse,
                      ValidateResponse, handle_categorize, handle_evaluate,
                      handle_validate)

EXIT_OK = 0
EXIT_DATA = 1
EXIT_CONFIG = 2

_EXIT_BY_KIND = {"data": EXIT_DATA, "config": EXIT_CONFIG}


class _RemoteError(Exception):
    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(message)


def _post_remote(server: str, endpoint: str, req: EvaluateRequest, model):
    import httpx

    url = server.rstrip("/") + endpoint
    resp = httpx.post(url, json=req.model_dump(mode="json"), timeout=600.0)
    if resp.status_code == 400:
        detail = resp.json().get("detail", {})
        raise _RemoteError(detail.get("kind", "data"),
                           detail.get("message", "request failed"))
    if resp.status_code == 422:  # request schema rejected
        raise _RemoteError("config", str(resp.json().get("detail")))
    resp.raise_for_status()
    return model.model_validate(resp.json())


def _call(server: str | None, endpoint: str, req: EvaluateRequest,
          handler, model):
    if server:
        return _post_remote(server, endpoint, req, model)
    return handler(req)


def _write_artifacts(output_dir: str, artifacts: dict[str, str]) -> list[str]:
    os.makedirs(output_dir, exist_ok=True)
    written = []
    for name, content in artifacts.items():
        path = os.path.join(output_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(content)
        written.append(path)
    return written


def _fmt(value) -> str:
    return "na" if value is None else repr(value)


def _print_summary(summary: dict, warnings: list[str]) -> None:
    counts = summary["cardinalities"]
    print(f"frames: {summary['frames']}")
    print("ground-truth categories: "
          + "  ".join(f"{k}={counts[k]}" for k in
                      ("F", "B", "E", "C", "A", "ignored")))
    print(f"reasonable subset: {counts['reasonable']}")
    print(f"lamr_reasonable: {_fmt(summary['lamr_reasonable'])}")
    for name in ("flamr", "flamr_ghost"):
        row = summary[name]
        print(name + ": " + "  ".join(f"{k}={_fmt(row[k])}"
                                      for k in ("F", "B", "E", "C", "A")))
    op = summary["operating_point"]
    if op is None:
        print("operating point: na (no foreground boxes)")
    else:
        flag = " [misses at sweep floor]" if op["miss_at_c_min"] else ""
        print(f"operating point: c*={op['threshold']!r} "
              f"mr_F={op['miss_rate_foreground']!r} "
              f"gdpi={op['gdpi']!r}{flag}")
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)


def _scalar_from_summary(summary: dict, metric: str, category: str | None):
    if metric in ("flamr", "flamr_ghost"):
        if category is None:
            raise ConfigError(f"--metric {metric} needs --category")
        if category not in summary[metric]:
            raise ConfigError(f"unknown category {category!r}")
        return summary[metric][category]
    if metric == "lamr_reasonable":
        return summary["lamr_reasonable"]
    op = summary["operating_point"]
    if op is None:
        return None
    return {"c_star": op["threshold"],
            "mr_at_star": op["miss_rate_foreground"],
            "gdpi_at_star": op["gdpi"]}[metric]


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    req = EvaluateRequest(config=cfg)
    resp: EvaluateResponse = _call(args.server, "/evaluate", req,
                                   handle_evaluate, EvaluateResponse)
    _write_artifacts(cfg.output_dir, resp.artifacts)
    if args.metric:
        print(_fmt(_scalar_from_summary(resp.summary, args.metric,
                                        args.category)))
    else:
        _print_summary(resp.summary, resp.warnings)
        print(f"artifacts written to {cfg.output_dir}")
    return EXIT_OK


def cmd_categorize(args) -> int:
    cfg = load_config(args.config)
    req = EvaluateRequest(config=cfg)
    resp: CategorizeResponse = _call(args.server, "/categorize", req,
                                     handle_categorize, CategorizeResponse)
    _write_artifacts(cfg.output_dir, resp.artifacts)
    counts = resp.cardinalities
    print("category      count")
    for key in ("F", "B", "E", "C", "A", "ignored", "reasonable",
                "total_non_ignored"):
        print(f"{key:<13} {counts[key]}")
    print(f"residual_candidates {resp.residual_candidates}")
    for w in resp.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    req = EvaluateRequest(config=cfg)
    resp: ValidateResponse = _call(args.server, "/validate", req,
                                   handle_validate, ValidateResponse)
    for d in resp.diagnostics:
        print(f"{d.level}: {d.message}")
    if resp.ok:
        print("ok")
        return EXIT_OK
    return EXIT_DATA


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("pedeval.service:app", host=args.host, port=args.port)
    return EXIT_OK


def cmd_fixture(args) -> int:
    from .synth import random_scene, render, write_fixture

    scenes = [render(random_scene(args.seed + i)) for i in range(args.frames)]
    paths = write_fixture(args.out, scenes)
    print(f"fixture written to {args.out}")
    print(f"run config: {paths['config']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pedeval",
        description="Segmentation-aware evaluation of pedestrian detectors")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_client(p):
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--server", default=os.environ.get("PEDEVAL_SERVER"),
                       help="evaluate against a running service instead of "
                            "in process")

    p = sub.add_parser("evaluate", help="full evaluation with curves and scores")
    add_client(p)
    p.add_argument("--metric", choices=["flamr", "flamr_ghost",
                                        "lamr_reasonable", "c_star",
                                        "mr_at_star", "gdpi_at_star"],
                   help="print a single scalar instead of the summary")
    p.add_argument("--category", choices=["F", "B", "E", "C", "A"],
                   help="category for --metric flamr / flamr_ghost")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("categorize", help="ground-truth categories only")
    add_client(p)
    p.set_defaults(func=cmd_categorize)

    p = sub.add_parser("validate", help="dry-run input checks")
    add_client(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("fixture", help="write a synthetic demo dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=5)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _RemoteError as e:
        print(f"error: {e}", file=sys.stderr)
        return _EXIT_BY_KIND.get(e.kind, EXIT_DATA)
    except PedevalError as e:
        print(f"error: {e}", file=sys.stderr)
        return _EXIT_BY_KIND.get(e.kind, EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
