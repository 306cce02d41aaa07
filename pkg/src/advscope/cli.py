"""Command-line pipeline driver: gen-data, train, attack, precompute, serve,
export. Paths are resolved against --workdir. Exit codes: 0 ok, 2 validation,
3 io/format, 4 compute failure.
"""

import functools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import measures, vulnmap
from .attack import AttackConfig, attack_dataset
from .data import generate_shapes_dataset, load_dataset, save_dataset
from .errors import AdvscopeError, FormatError, InvalidInputError
from .nn.io import load_model, save_model
from .nn.model import Model, mininet
from .nn.train import TrainConfig, accuracy, train
from .workspace import Workspace, save_run

EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_COMPUTE = 4


def _exit_code(exc):
    if isinstance(exc, InvalidInputError):
        return EXIT_VALIDATION
    if isinstance(exc, (FormatError, OSError)):
        return EXIT_IO
    return EXIT_COMPUTE


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (AdvscopeError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_exit_code(exc))

    return wrapper


@click.group()
@click.option("--workdir", default=".", show_default=True,
              help="Base directory for all relative paths.")
@click.pass_context
def main(ctx, workdir):
    """Adversarial-attack interpretation workbench."""
    ctx.obj = Path(workdir)


def _resolve(ctx, path):
    p = Path(path)
    return p if p.is_absolute() else ctx.obj / p


@main.command("gen-data")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--per-class", default=500, show_default=True, type=int)
@click.option("--image-size", default=32, show_default=True, type=int)
@click.option("--test-fraction", default=0.2, show_default=True, type=float)
@click.option("--out", default="shapes.npz", show_default=True)
@click.pass_context
@handle_errors
def gen_data(ctx, seed, per_class, image_size, test_fraction, out):
    """Generate the synthetic shapes dataset archive."""
    dataset = generate_shapes_dataset(seed, per_class, image_size)
    out = _resolve(ctx, out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, out, seed=seed, test_fraction=test_fraction)
    click.echo(f"wrote {len(dataset)} images ({len(dataset.class_names)} classes) to {out}")


@main.command("train")
@click.option("--data", default="shapes.npz", show_default=True)
@click.option("--epochs", default=10, show_default=True, type=int)
@click.option("--batch-size", default=32, show_default=True, type=int)
@click.option("--lr", default=0.05, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default="model.mnet", show_default=True)
@click.pass_context
@handle_errors
def train_cmd(ctx, data, epochs, batch_size, lr, seed, out):
    """Train the small CNN and report train/test accuracy per epoch."""
    dataset, train_idx, test_idx = load_dataset(_resolve(ctx, data))
    spec = mininet(
        class_count=len(dataset.class_names),
        class_names=dataset.class_names,
        input_size=dataset.images.shape[1],
    )
    model = Model.create(spec, seed=seed)
    config = TrainConfig(epochs=epochs, batch_size=batch_size,
                         learning_rate=lr, seed=seed)
    history = train(
        model, dataset.images[train_idx], dataset.labels[train_idx], config,
        test_images=dataset.images[test_idx], test_labels=dataset.labels[test_idx],
        log=lambda r: click.echo(
            f"epoch {r['epoch']}: loss {r['loss']:.4f} "
            f"train {r['train_accuracy']:.4f} test {r.get('test_accuracy', 0.0):.4f}"
        ),
    )
    out = _resolve(ctx, out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    final = history[-1]
    click.echo(
        f"saved {out} (train acc {final['train_accuracy']:.4f}, "
        f"test acc {final.get('test_accuracy', float('nan')):.4f})"
    )


@main.command("attack")
@click.option("--model", "model_path", default="model.mnet", show_default=True)
@click.option("--data", default="shapes.npz", show_default=True)
@click.option("--split", default="test", show_default=True,
              type=click.Choice(["train", "test", "all"]))
@click.option("--eps", default=8 / 255, show_default=True, type=float)
@click.option("--alpha", default=2 / 255, show_default=True, type=float)
@click.option("--steps", default=7, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--random-start/--no-random-start", default=True, show_default=True)
@click.option("--out", default="run", show_default=True)
@click.pass_context
@handle_errors
def attack_cmd(ctx, model_path, data, split, eps, alpha, steps, seed,
               random_start, out):
    """Attack a dataset split and write the resulting run directory."""
    if alpha > eps:
        click.echo(f"warning: alpha {alpha} exceeds eps {eps}; clamping", err=True)
        alpha = eps
    config = AttackConfig(steps=steps, eps=eps, alpha=alpha,
                          random_start=random_start, seed=seed)
    model_path = _resolve(ctx, model_path)
    model = load_model(model_path)
    dataset, train_idx, test_idx = load_dataset(_resolve(ctx, data))
    if split == "train":
        idx = train_idx
    elif split == "test":
        idx = test_idx
    else:
        idx = np.arange(len(dataset))
    pairs = attack_dataset(model, dataset.images[idx], dataset.labels[idx], config)
    out = _resolve(ctx, out)
    save_run(out, pairs, dataset.class_names, config, os.path.relpath(model_path, out))
    if not pairs:
        click.echo("warning: attack flipped no predictions; run is empty", err=True)
    click.echo(f"wrote run {out}: {len(pairs)} pairs from {len(idx)} images")


@main.command("precompute")
@click.option("--run", default="run", show_default=True)
@click.option("--k", default=vulnmap.DEFAULT_REGION, show_default=True, type=int)
@click.option("--s", default=vulnmap.DEFAULT_STRIDE, show_default=True, type=int)
@click.option("--q", default=vulnmap.DEFAULT_TOP_FRACTION, show_default=True, type=float)
@click.option("--t", default=0.5, show_default=True, type=float,
              help="RF threshold used for dendrograms.")
@click.option("--space", default="probability", show_default=True,
              type=click.Choice(list(vulnmap.VALUE_SPACES)))
@click.option("--linkage", default="average", show_default=True,
              type=click.Choice(["average", "complete", "single"]))
@click.option("--threads", default=0, show_default=True, type=int,
              help="Worker cap; 0 picks the CPU count.")
@click.option("--pairs", "pair_list", default="", help="Comma-separated pair "
              "ids to restrict to (default: all pairs in the run).")
@click.pass_context
@handle_errors
def precompute_cmd(ctx, run, k, s, q, t, space, linkage, threads, pair_list):
    """Fill the run's vulnerability-map and dendrogram caches for all pairs."""
    from .server.session import Session

    ws = Workspace.load(_resolve(ctx, run))
    session = Session(ws)
    if threads <= 0:
        threads = os.cpu_count() or 1
    if pair_list:
        try:
            targets = [ws.pair(int(v)) for v in pair_list.split(",")]
        except ValueError:
            raise InvalidInputError("--pairs must be comma-separated ints") from None
    else:
        targets = ws.pairs

    def work(pair):
        session.vulnerability_map(pair.id, k, s, space)
        session.dendrogram_json(pair.id, t, linkage)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, targets))
    total = session.disk_hits + session.disk_misses
    pct = 100.0 * session.disk_hits / total if total else 100.0
    click.echo(
        f"precomputed {len(targets)} pairs "
        f"(k={k} s={s} q={q} t={t}); cache hits {pct:.0f}%"
    )


@main.command("serve")
@click.option("--run", default="run", show_default=True)
@click.option("--addr", default=None,
              help="host:port; falls back to ADVSCOPE_ADDR, then 127.0.0.1:8000.")
@click.option("--cache-mb", default=256, show_default=True, type=int)
@click.pass_context
@handle_errors
def serve_cmd(ctx, run, addr, cache_mb):
    """Serve the JSON API (and the static UI when built) for a run."""
    import uvicorn

    from .server.app import create_app

    addr = addr or os.environ.get("ADVSCOPE_ADDR") or "127.0.0.1:8000"
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise InvalidInputError(f"--addr must be host:port, got {addr!r}")
    ws = Workspace.load(_resolve(ctx, run))
    app = create_app(ws, cache_bytes=cache_mb * 1024 * 1024)
    click.echo(f"serving run {run} on http://{host}:{port}")
    uvicorn.run(app, host=host, port=int(port), log_level="warning")


@main.command("export")
@click.option("--run", default="run", show_default=True)
@click.option("--pair", required=True, type=int)
@click.option("--what", required=True, type=click.Choice(["rf", "vulnmap", "dendrogram"]))
@click.option("--neuron", default=0, show_default=True, type=int,
              help="Neuron id for --what=rf.")
@click.option("--k", default=vulnmap.DEFAULT_REGION, show_default=True, type=int)
@click.option("--s", default=vulnmap.DEFAULT_STRIDE, show_default=True, type=int)
@click.option("--q", default=vulnmap.DEFAULT_TOP_FRACTION, show_default=True, type=float)
@click.option("--t", default=0.5, show_default=True, type=float)
@click.option("--out", default="exports", show_default=True)
@click.pass_context
@handle_errors
def export_cmd(ctx, run, pair, what, neuron, k, s, q, t, out):
    """Write offline artifacts (PNG images, JSON structures) for one pair."""
    from .rf import receptive_field, rle_encode
    from .server.session import Session, heatmap_overlay, png_bytes

    ws = Workspace.load(_resolve(ctx, run))
    session = Session(ws)
    p = ws.pair(pair)
    out = _resolve(ctx, out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if what == "rf":
        for side in ("benign", "adversarial"):
            trace = session.trace(pair, side)
            image = p.benign if side == "benign" else p.adversarial
            field = receptive_field(trace, neuron, image, threshold=t)
            png = out / f"rf_{pair}_{neuron}_{side}.png"
            png.write_bytes(png_bytes(field.image))
            mask = out / f"rf_{pair}_{neuron}_{side}.json"
            mask.write_text(json.dumps(
                {"mask": rle_encode(field.mask), "dead": field.dead, "t": t}
            ))
            written += [png, mask]
    elif what == "vulnmap":
        vmap = session.vulnerability_map(pair, k, s, "probability")
        for which in ("benign", "adversarial"):
            score = vulnmap.vulnerability_score(vmap, which)
            png = out / f"vulnmap_{pair}_{which}.png"
            png.write_bytes(png_bytes(heatmap_overlay(p.benign, score)))
            grid = out / f"vulnmap_{pair}_{which}.json"
            grid.write_text(json.dumps({
                "k": k, "s": s, "q": q,
                "score": score.tolist(),
                "binarized": rle_encode(vulnmap.binarize_top_q(score, q)),
            }))
            written += [png, grid]
    else:
        payload = session.dendrogram_json(pair, t, "average")
        path = out / f"dendrogram_{pair}.json"
        path.write_text(json.dumps(payload, sort_keys=True))
        written.append(path)
    for path in written:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
