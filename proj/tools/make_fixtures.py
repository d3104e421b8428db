#!/usr/bin/env python3
# Copyright (C) 2026 The vpp Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the evaluation fixtures under fixtures/.

The record sets are synthetic: integer human scores are searched so that
their mean/std match the published aggregates, and continuous metrics
(CLIP, MQS) are standardized deterministic sequences rescaled to the
published mean/std. Output is deterministic.
"""

import json
import math
import pathlib
import random
import struct
import zlib

ROOT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def search_scores(n, lo, hi, total, sumsq, fixed=(), seed=0):
    """Integer scores in [lo, hi] (plus `fixed`) with the given sum and sum of squares."""
    rng = random.Random(seed)
    free = n - len(fixed)
    target_sum = total - sum(fixed)
    target_sq = sumsq - sum(x * x for x in fixed)
    xs = [min(hi, max(lo, round(target_sum / free)))] * free
    def cost(v):
        return abs(sum(v) - target_sum) * 1000 + abs(sum(x * x for x in v) - target_sq)
    best = cost(xs)
    for _ in range(400000):
        if best == 0:
            break
        i, j = rng.randrange(free), rng.randrange(free)
        di = rng.choice((-1, 1))
        dj = rng.choice((-1, 0, 1))
        a, b = xs[i] + di, xs[j] + dj
        if i == j or not (lo <= a <= hi and lo <= b <= hi):
            continue
        old = xs[i], xs[j]
        xs[i], xs[j] = a, b
        c = cost(xs)
        if c <= best:
            best = c
        else:
            xs[i], xs[j] = old
    xs = list(fixed) + xs
    rng.shuffle(xs)
    return xs


def standardized(n, seed):
    rng = random.Random(seed)
    z = [rng.random() for _ in range(n)]
    m = sum(z) / n
    s = math.sqrt(sum((x - m) ** 2 for x in z) / n)
    return [(x - m) / s for x in z]


def continuous(n, mean, std, seed):
    return [round(mean + std * z, 6) for z in standardized(n, seed)]


def pop_sumsq(n, mean, std):
    return round(n * (std * std + mean * mean))


def echo_dot_records():
    records = []
    # Naive: 77 successes / 23 failures gives the 29.87% failure rate.
    n, failures = 100, 23
    assigned = search_scores(n, 1, 10, 465, pop_sumsq(n, 4.65, 3.60), fixed=[0] * failures, seed=1)
    success_flags = [a > 0 for a in assigned]
    size = search_scores(77, 0, 10, 235, pop_sumsq(77, 3.05, 2.98), seed=2)
    clip = continuous(n, 32.85, 3.19, seed=3)
    mqs = continuous(n, 0.75, 0.14, seed=4)
    size_iter = iter(size)
    for i in range(n):
        rec = {
            "image": f"echo_dot/naive_{i:03d}.png",
            "condition": "naive",
            "assigned_score": assigned[i],
            "success": success_flags[i],
            "clip_score": clip[i],
            "mqs": mqs[i],
        }
        if success_flags[i]:
            rec["size_score"] = next(size_iter)
        records.append(rec)
    # Alignment: every image contains the product.
    assigned = search_scores(n, 1, 10, 631, pop_sumsq(n, 6.31, 2.39), seed=5)
    size = search_scores(n, 0, 10, 470, pop_sumsq(n, 4.70, 2.81), seed=6)
    clip = continuous(n, 33.85, 2.54, seed=7)
    mqs = continuous(n, 0.82, 0.05, seed=8)
    for i in range(n):
        records.append({
            "image": f"echo_dot/alignment_{i:03d}.png",
            "condition": "alignment",
            "assigned_score": assigned[i],
            "size_score": size[i],
            "success": True,
            "clip_score": clip[i],
            "mqs": mqs[i],
        })
    return records


def count_records(prefix, condition, success, failure):
    out = []
    for i in range(success + failure):
        out.append({
            "image": f"{prefix}/{condition}_{i:03d}.png",
            "condition": condition,
            "success": i < success,
        })
    return out


def write_png(path, width, height, pixel):
    """RGB PNG; pixel(x, y) -> (r, g, b)."""
    raw = bytearray()
    for y in range(height):
        raw.append(0)
        for x in range(width):
            raw.extend(pixel(x, y))
    def chunk(tag, data):
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)
    png = b"\x89PNG\r\n\x1a\n"
    png += chunk(b"IHDR", struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0))
    png += chunk(b"IDAT", zlib.compress(bytes(raw), 9))
    png += chunk(b"IEND", b"")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(png)


def images():
    # Kitchen-like background: wall above, countertop band below.
    def background(x, y):
        if y < 40:
            return (200, 190 + (x % 8), 170)
        return (120 + (x * 3) % 20, 90, 60 + (y % 5))
    write_png(ROOT / "images" / "background.png", 96, 96, background)
    # Product samples: a dark cylinder on a light backdrop, five variants.
    for k in range(5):
        cx, r = 32 + 2 * k, 12 + k
        def sample(x, y, cx=cx, r=r, k=k):
            if abs(x - cx) <= r and 16 <= y <= 52:
                return (30 + 10 * k, 40, 60)
            return (235, 235, 235 - 5 * k)
        write_png(ROOT / "images" / "samples" / f"sample_{k}.png", 64, 64, sample)


def main():
    ROOT.mkdir(parents=True, exist_ok=True)
    (ROOT / "echo_dot_alignment_records.json").write_text(json.dumps(echo_dot_records(), indent=1) + "\n")
    table1 = {
        "echo_dot_content": count_records("echo_dot", "naive", 72, 28) + count_records("echo_dot", "alignment", 94, 6),
        "lupure_content": count_records("lupure", "naive", 87, 13) + count_records("lupure", "alignment", 100, 0),
    }
    for name, recs in table1.items():
        (ROOT / f"table1_{name}_records.json").write_text(json.dumps(recs, indent=1) + "\n")
    images()


if __name__ == "__main__":
    main()
