"""Benchmark the compiled sampling kernel against the pure-Python fallback.

Runs the full tracking pipeline on the same simulated sequence once per
available backend, reports frames per second, and verifies that the two
backends produce identical trajectories (they share one sampling algorithm;
the compiled kernel is only a faster implementation of it).

Usage: python3 benchmarks/bench_backends.py [--objects 20] [--frames 600]
"""

from __future__ import annotations

import argparse
import time

from motrack import TrackingConfig, generate_scenario, linear_scenario, track_sequence
from motrack.backend import available_backends


def run_once(backend: str, detections, info) -> tuple[float, tuple]:
    config = TrackingConfig(backend=backend)
    start = time.perf_counter()
    records, _ = track_sequence(detections, info, config)
    elapsed = time.perf_counter() - start
    return info.frame_count / elapsed, tuple(records)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--objects", type=int, default=20)
    parser.add_argument("--frames", type=int, default=600)
    parser.add_argument("--width", type=int, default=1920)
    parser.add_argument("--height", type=int, default=1080)
    parser.add_argument(
        "--repeats", type=int, default=3, help="keep the best of N timed runs"
    )
    args = parser.parse_args(argv)

    spec = linear_scenario(
        n_objects=args.objects,
        frame_count=args.frames,
        image_width=args.width,
        image_height=args.height,
    )
    data = generate_scenario(spec)
    print(
        f"scenario: {args.objects} objects x {args.frames} frames "
        f"({args.width}x{args.height}), best of {args.repeats}"
    )

    results: dict[str, tuple[float, tuple]] = {}
    for backend in available_backends():
        best_fps, trajectories = 0.0, ()
        for _ in range(args.repeats):
            fps, trajectories = run_once(backend, data.detections, data.info)
            best_fps = max(best_fps, fps)
        results[backend] = (best_fps, trajectories)
        print(f"{backend:>8}: {best_fps:8.1f} fps")

    payloads = {trajectories for _, trajectories in results.values()}
    if len(results) > 1:
        if len(payloads) == 1:
            print("output parity: identical trajectories from all backends")
        else:
            print("output parity: MISMATCH between backends")
            return 1
        fastest = max(results, key=lambda k: results[k][0])
        slowest = min(results, key=lambda k: results[k][0])
        ratio = results[fastest][0] / results[slowest][0]
        print(f"speedup: {fastest} is {ratio:.1f}x faster than {slowest}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
