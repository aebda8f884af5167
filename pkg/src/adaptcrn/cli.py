"""Command-line interface for the enhancement engine.

Subcommands: enhance, init-weights, count, analyze, verify, serve.  Every
command runs in-process by default; passing ``--server URL`` before the
subcommand turns the CLI into a thin client for a running service (WAV and
JSON files are still read and written locally).

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Optional

import numpy as np

from . import verify as verify_mod
from .accounting import attention_trace, count_report
from .config import ModelConfig, adaptive_layer_names
from .errors import AdaptcrnError, ConfigurationError
from .model import build_model, enhance_offline, enhance_streaming
from .wavio import read_wav, write_wav
from .weights import init_random, load, save

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; this CLI reserves 2 for
    data errors, so usage problems exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class _Remote:
    """Minimal client for the HTTP service."""

    def __init__(self, base_url: str):
        self.base = base_url.rstrip("/")

    def _check(self, resp):
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise ConfigurationError(
                f"server responded {resp.status_code}: {detail}")
        return resp

    def get(self, path: str):
        import httpx
        try:
            return self._check(httpx.get(self.base + path, timeout=600.0))
        except httpx.HTTPError as exc:
            raise ConfigurationError(f"cannot reach {self.base}: {exc}") from exc

    def post(self, path: str, payload: dict):
        import httpx
        try:
            return self._check(
                httpx.post(self.base + path, json=payload, timeout=600.0))
        except httpx.HTTPError as exc:
            raise ConfigurationError(f"cannot reach {self.base}: {exc}") from exc


def _load_config(path: Optional[str]) -> ModelConfig:
    if path is None:
        return ModelConfig()
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: config must be a JSON object")
    return ModelConfig.from_dict(raw)


def _load_model(args):
    return build_model(_load_config(args.config), load(args.weights))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_enhance(args) -> int:
    x = read_wav(args.input)
    if args.server:
        remote = _Remote(args.server)
        body = remote.post("/enhance", {"samples": x.tolist(),
                                        "streaming": args.streaming}).json()
        y = np.asarray(body["samples"], dtype=np.float32)
    else:
        model = _load_model(args)
        run = enhance_streaming if args.streaming else enhance_offline
        y = run(model, x)
    write_wav(args.output, y)
    mode = "streaming" if args.streaming else "offline"
    print(f"enhanced {len(x)} samples ({mode}) -> {args.output}")
    return EXIT_OK


def cmd_init_weights(args) -> int:
    if args.server:
        cfg_dict = _load_config(args.config).to_dict()
        resp = _Remote(args.server).post("/init-weights",
                                         {"config": cfg_dict,
                                          "seed": args.seed})
        with open(args.out, "wb") as fh:
            fh.write(resp.content)
        print(f"wrote weights (seed {args.seed}) -> {args.out}")
        return EXIT_OK
    cfg = _load_config(args.config)
    store = init_random(cfg, args.seed)
    save(store, args.out)
    print(f"wrote {len(store)} tensors, {store.n_values()} values "
          f"(seed {args.seed}) -> {args.out}")
    return EXIT_OK


def _render_count(body: dict) -> str:
    width = max(len(row["name"]) for row in body["rows"]) + 2
    lines = [f"{'layer':<{width}}{'params':>10}  {'MACs/frame':>12}"]
    for row in body["rows"]:
        lines.append(f"{row['name']:<{width}}{row['params']:>10,}  "
                     f"{row['macs_per_frame']:>12,}")
    lines.append(f"{'total':<{width}}{body['total_params']:>10,}  "
                 f"{body['total_macs_per_frame']:>12,}")
    mps = body["macs_per_second"]
    lines.append(f"{'':<{width}}{body['total_params'] / 1e3:>9.2f}K  "
                 f"{mps / 1e6:>10.2f}M/s")
    return "\n".join(lines)


def cmd_count(args) -> int:
    cfg = _load_config(args.config)
    if args.variant == "no-adaptive":
        cfg = replace(cfg, adaptive=False)
    if args.server:
        body = _Remote(args.server).post("/count",
                                         {"config": cfg.to_dict()}).json()
    else:
        body = count_report(cfg).to_json()
    print(json.dumps(body, indent=2) if args.json else _render_count(body))
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.layer == "list":
        if args.server:
            names = _Remote(args.server).get("/layers").json()["layers"]
        else:
            names = adaptive_layer_names(_load_config(args.config))
        for name in names:
            print(name)
        return EXIT_OK
    if args.input is None or args.out is None:
        raise ConfigurationError(
            "--input and --out are required unless --layer list")
    x = read_wav(args.input)
    if args.server:
        body = _Remote(args.server).post("/analyze",
                                         {"samples": x.tolist(),
                                          "layer": args.layer}).json()
    else:
        body = attention_trace(_load_model(args), x, args.layer).to_json()
    with open(args.out, "w") as fh:
        json.dump(body, fh, indent=2)
        fh.write("\n")
    print(f"traced {args.layer}: {body['n_frames']} frames, "
          f"{body['n_speech_frames']} speech -> {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.server:
        if args.inject:
            raise ConfigurationError("fault injection runs locally only")
        body = _Remote(args.server).post("/verify",
                                         {"seed": args.seed,
                                          "cases": args.cases}).json()
        results = [verify_mod.SuiteResult(**r) for r in body["results"]]
    else:
        results = verify_mod.run_all(seed=args.seed, cases=args.cases,
                                     inject=args.inject)
    print(verify_mod.render(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    model = _load_model(args) if args.weights else None
    app = create_app(model)
    state = "with model" if model is not None else "without model"
    print(f"serving {state} on {args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="adaptcrn",
                     description="Streaming speech enhancement engine")
    parser.add_argument("--server", metavar="URL", default=None,
                        help="send the command to a running service instead "
                             "of executing in-process")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("enhance", help="denoise a 16 kHz mono WAV file")
    p.add_argument("--weights", help="weight file (required unless --server)")
    p.add_argument("--input", required=True, help="input WAV path")
    p.add_argument("--output", required=True, help="output WAV path")
    p.add_argument("--streaming", action="store_true",
                   help="process hop-by-hop instead of whole-utterance")
    p.add_argument("--config", help="model config JSON (defaults otherwise)")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("init-weights",
                       help="write deterministically seeded random weights")
    p.add_argument("--config", help="model config JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output weight file")
    p.set_defaults(func=cmd_init_weights)

    p = sub.add_parser("count",
                       help="per-layer parameter and MAC accounting")
    p.add_argument("--config", help="model config JSON")
    p.add_argument("--json", action="store_true",
                   help="emit the report as JSON")
    p.add_argument("--variant", choices=["default", "no-adaptive"],
                   default="default",
                   help="no-adaptive switches kernel attention off")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("analyze",
                       help="trace per-frame kernel-attention weights")
    p.add_argument("--weights", help="weight file (required unless --server)")
    p.add_argument("--input", help="input WAV path")
    p.add_argument("--layer", required=True,
                   help="adaptive layer name, or 'list' to enumerate them")
    p.add_argument("--out", help="output JSON path")
    p.add_argument("--config", help="model config JSON")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="run the randomized property suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=None,
                   help="case count for every suite (default: per-suite)")
    p.add_argument("--inject", choices=list(verify_mod.INJECT_MODES),
                   default=None,
                   help="deliberately break one numeric path to prove the "
                        "harness catches it")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--weights", help="weight file to serve (optional)")
    p.add_argument("--config", help="model config JSON")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    needs_weights = args.command == "enhance" or (
        args.command == "analyze" and args.layer != "list")
    if needs_weights and not args.server and not args.weights:
        parser.error(f"{args.command} requires --weights (or --server)")
    try:
        return args.func(args)
    except AdaptcrnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
