"""Command-line interface: train, eval, predict, bench, inspect, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import architectures, data, metrics, modelio, training
from .recommender import AffectPrediction


@dataclass
class BenchReport:
    """Inference latencies for one model on one image."""

    latencies_ms: list

    @property
    def runs(self) -> int:
        return len(self.latencies_ms)

    @property
    def mean_ms(self) -> float:
        return sum(self.latencies_ms) / len(self.latencies_ms)

    @property
    def fps(self) -> float:
        return 1000.0 / self.mean_ms

    def to_text(self) -> str:
        return "\n".join(
            [
                f"runs:    {self.runs}",
                f"mean_ms: {self.mean_ms:.2f}",
                f"fps:     {self.fps:.1f}",
            ]
        )


def run_bench(model, image_tensor, runs: int = 10) -> BenchReport:
    """Time ``runs`` inference passes after one warm-up; preprocessing is
    excluded so the numbers describe the model itself."""
    model.forward(image_tensor)
    latencies = []
    for _ in range(runs):
        started = time.perf_counter()
        model.forward(image_tensor)
        latencies.append((time.perf_counter() - started) * 1000.0)
    return BenchReport(latencies_ms=latencies)


def _head_task(head):
    return data.TASK_CLASSIFICATION if head == architectures.HEAD_EMOTION else data.TASK_REGRESSION


def _cmd_train(args):
    manifest = data.load_manifest(args.manifest, _head_task(args.head))
    root = args.images_root or os.path.dirname(os.path.abspath(args.manifest))
    x, y = data.load_arrays(manifest, root=root)

    if args.init_from:
        source = modelio.load(args.init_from)
        model = architectures.swap_head(source, args.head, seed=args.seed)
        print(f"initialized from {args.init_from} ({source.arch_id}, head swapped)")
    else:
        model = architectures.build(args.arch, args.head, seed=args.seed)

    if args.head == architectures.HEAD_EMOTION:
        loss = training.LOSS_WCE
        weights = None
        if len(y) and not args.no_class_weighting:
            counts = np.bincount(y, minlength=8)
            if np.all(counts > 0):
                weights = training.class_weights(counts)
            else:
                print("warning: not every class present; training unweighted")
        config = training.TrainConfig(
            epochs=args.epochs,
            batch_size=args.batch,
            loss=loss,
            class_weights=weights,
            augment=training.AugmentConfig() if not args.no_augment else None,
            seed=args.seed,
            learning_rate=args.lr,
        )
    else:
        config = training.TrainConfig(
            epochs=args.epochs,
            batch_size=args.batch,
            loss=training.LOSS_MSE,
            augment=training.AugmentConfig() if not args.no_augment else None,
            seed=args.seed,
            learning_rate=args.lr,
        )

    log = training.train(model, (x, y), config, val=(x, y) if len(x) else None)
    nbytes = modelio.save(model, args.out)
    print(f"saved {model.arch_id} ({model.head}) to {args.out}: {nbytes:,} bytes")
    if args.log:
        log.write(args.log)
        print(f"wrote training log to {args.log}")
    for record in log.records:
        print(record.to_json())
    return 0


def _load_predictions(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if "probabilities" in payload:
        return data.TASK_CLASSIFICATION, np.asarray(payload["probabilities"], dtype=np.float64)
    if "predictions" in payload:
        return data.TASK_REGRESSION, np.asarray(payload["predictions"], dtype=np.float64)
    raise ValueError(f"{path} must hold 'probabilities' (n x 8) or 'predictions' (n x 2)")


def _cmd_eval(args):
    if args.model:
        model = modelio.load(args.model)
        task = _head_task(model.head)
        manifest = data.load_manifest(args.manifest, task)
        root = args.images_root or os.path.dirname(os.path.abspath(args.manifest))
        x, y = data.load_arrays(manifest, root=root)
        if not len(x):
            print("manifest has no usable samples", file=sys.stderr)
            return 1
        out = training._predict_batched(model, x, args.batch)
    else:
        task, out = _load_predictions(args.predictions)
        manifest = data.load_manifest(args.manifest, task)
        # Predictions come precomputed; only targets are needed from the manifest.
        if task == data.TASK_CLASSIFICATION:
            y = np.array([s.emotion for s in manifest.samples], dtype=np.int64)
        else:
            y = np.array(
                [(s.valence, s.arousal) for s in manifest.samples], dtype=np.float64
            ).reshape(-1, 2)
        if len(y) != len(out):
            print(
                f"{len(out)} predictions but {len(y)} manifest samples", file=sys.stderr
            )
            return 1

    if task == data.TASK_CLASSIFICATION:
        report = metrics.evaluate_classification(y, out)
    else:
        report = metrics.evaluate_regression(out, y)
    print(report.to_text())
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    return 0


def _cmd_predict(args):
    classifier = modelio.load(args.classifier)
    regressor = modelio.load(args.regressor)
    bbox = tuple(float(v) for v in args.bbox.split(",")) if args.bbox else None
    tensor = data.preprocess(data.load_image(args.image), bbox)
    started = time.perf_counter()
    probs = classifier.forward(tensor).array
    va = regressor.forward(tensor).array
    latency_ms = (time.perf_counter() - started) * 1000.0
    pred = AffectPrediction(probs, float(va[0]), float(va[1]))
    print(
        json.dumps(
            {
                "emotion": pred.emotion,
                "emotion_id": pred.emotion_id,
                "probabilities": {
                    name: pred.emotion_probs[i] for i, name in enumerate(data.EMOTIONS)
                },
                "valence": pred.valence,
                "arousal": pred.arousal,
                "models": {"classifier": classifier.arch_id, "regressor": regressor.arch_id},
                "latency_ms": latency_ms,
            },
            indent=2,
        )
    )
    return 0


def _cmd_bench(args):
    model = modelio.load(args.model)
    tensor = data.preprocess(data.load_image(args.image))
    report = run_bench(model, tensor, runs=args.runs)
    print(report.to_text())
    return 0


def _cmd_inspect(args):
    print(modelio.model_info(args.model).to_text())
    return 0


def _cmd_serve(args):
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(
        classifier_path=args.classifier,
        regressor_path=args.regressor,
        ratings_path=args.ratings,
        static_dir=args.static_dir,
    )
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(prog="affectlite", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    arch_choices = list(architectures.ARCH_IDS)
    head_choices = list(architectures.HEADS)

    p = sub.add_parser("train", help="train a model and save its weights")
    p.add_argument("--arch", choices=arch_choices, default=architectures.ARCH_VGGNET)
    p.add_argument("--head", choices=head_choices, required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--images-root", default=None)
    p.add_argument("--epochs", type=int, default=architectures.REFERENCE_EPOCHS["train"])
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--no-class-weighting", action="store_true")
    p.add_argument("--init-from", default=None, help="weight file to transfer a backbone from")
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None, help="write the per-epoch log as JSON lines")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a model or precomputed predictions")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--predictions", help="JSON file of precomputed outputs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--images-root", default=None)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--json", default=None, help="also write the report as JSON")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("predict", help="predict affect for one image")
    p.add_argument("--classifier", required=True)
    p.add_argument("--regressor", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--bbox", default=None, help="face box as 'x,y,w,h' pixels")
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("bench", help="time inference and report mean latency and fps")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--runs", type=int, default=10)
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("inspect", help="print the per-layer table of a weight file")
    p.add_argument("--model", required=True)
    p.set_defaults(fn=_cmd_inspect)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--classifier", default=None)
    p.add_argument("--regressor", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=int(os.environ.get("PORT", "8000")))
    p.add_argument("--ratings", default="ratings.jsonl")
    p.add_argument("--static-dir", default=None)
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
