"""Independent reference for the `stats` outputs of a small graph.

usage: stats_oracle.py VERTICES EDGES OUTDIR --bins B --top-k K --popular-k P --min-base M
"""
import argparse
import csv
import math
import statistics
from collections import Counter, defaultdict
from pathlib import Path

import numpy as np

R = 6371.0088
ACT = ["app_usage_days", "app_version", "uploaded_photo", "account_visible", "has_email", "photos_rejected",
       "feed_posts_v4", "feed_posts_v5", "feed_posts_v6", "feed_liked_commented_v4", "feed_liked_commented_v5",
       "feed_liked_commented_v6", "stories_read_v4", "stories_read_v5", "stories_read_v6", "chat_messages_v4",
       "chat_messages_v5", "chat_messages_v6", "followees_v4", "followees_v5", "followees_v6", "total_followers",
       "total_followees"]


def sci(x):
    m, e = f"{x:.9e}".split("e")
    return f"{m}e{int(e)}"


def haversine(a, b):
    p1, p2 = math.radians(a[0]), math.radians(b[0])
    dl = math.radians(b[1] - a[1])
    h = math.sin((p2 - p1) / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * R * math.asin(math.sqrt(min(h, 1.0)))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("vertices")
    ap.add_argument("edges")
    ap.add_argument("out")
    ap.add_argument("--bins", type=int, default=40)
    ap.add_argument("--top-k", type=int, default=10)
    ap.add_argument("--popular-k", type=int, default=7)
    ap.add_argument("--min-base", type=int, default=50)
    a = ap.parse_args()
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)

    verts = list(csv.DictReader(open(a.vertices)))
    ids = [int(v["id"]) for v in verts]
    pos = {i: k for k, i in enumerate(ids)}
    edges = set()
    for r in csv.DictReader(open(a.edges)):
        s, d = pos[int(r["src"])], pos[int(r["dst"])]
        if s != d:
            edges.add((s, d))
    n = len(verts)
    indeg = Counter(d for _, d in edges)
    succ = defaultdict(list)
    for s, d in edges:
        succ[s].append(d)

    # summary
    lines = ["# vertex attribute summary: mean, sample standard deviation, min, max", "attribute,mean,sd,min,max"]

    def row(name, xs):
        lines.append(f"{name},{statistics.fmean(xs):.6f},{statistics.stdev(xs):.6f},{min(xs):.6f},{max(xs):.6f}")

    for c in ACT[:2]:
        row(c, [float(v[c]) for v in verts])
    row("platform_ios", [1.0 if v["platform"].lower() == "ios" else 0.0 for v in verts])
    for c in ["age", "height_cm", "weight_kg"]:
        row(c, [float(v[c]) for v in verts])
    for c in ACT[2:]:
        row(c, [float(v[c]) for v in verts])
    (out / "summary.csv").write_text("\n".join(lines) + "\n")

    # follower degree distribution and log-log least squares over the leading run of consecutive degrees
    deg = Counter(indeg[k] for k in range(n) if indeg[k] > 0)
    total = sum(deg.values())
    ds = sorted(deg)
    run = [ds[0]]
    for d in ds[1:]:
        if d != run[-1] + 1:
            break
        run.append(d)
    x = np.log(run)
    y = np.log([deg[d] / total for d in run])
    slope, icpt = np.polyfit(x, y, 1)
    r2 = np.corrcoef(x, y)[0, 1] ** 2
    lines = ["# follower degree distribution on log-log axes (zero degrees omitted)",
             f"# power law fit: lambda={-slope:.6f} c={math.exp(icpt):.6f} xmin=1 xmax={run[-1]} r2={r2:.6f}",
             "degree,count,share,log_degree,log_share"]
    for d in ds:
        p = deg[d] / total
        lines.append(f"{d},{deg[d]},{sci(p)},{math.log(d):.9f},{math.log(p):.9f}")
    (out / "degree_distribution.csv").write_text("\n".join(lines) + "\n")

    # neighbour in-degree
    lines = ["# vertex in-degree against the mean in-degree of its followees (NA: follows nobody)",
             "id,in_degree,followees,mean_followee_in_degree"]
    for k in range(n):
        f = succ[k]
        m = f"{sum(indeg[j] for j in f) / len(f):.6f}" if f else "NA"
        lines.append(f"{ids[k]},{indeg[k]},{len(f)},{m}")
    (out / "neighbor_degree.csv").write_text("\n".join(lines) + "\n")

    # distance histograms
    top = math.floor(math.pi * R)
    edges_km = [top * b / a.bins for b in range(a.bins + 1)]
    allc, mutc = [0] * a.bins, [0] * a.bins
    ll = [(float(v["lat"]), float(v["lon"])) for v in verts]
    for i in range(n):
        for j in range(i + 1, n):
            d = haversine(ll[i], ll[j])
            b = min(int(np.searchsorted(edges_km, d, side="right")) - 1, a.bins - 1)
            allc[b] += 1
            if (i, j) in edges and (j, i) in edges:
                mutc[b] += 1
    lines = ["# geodesic distance between every pair of users and between mutually linked users",
             "lower_km,upper_km,all_pairs,mutual_pairs"]
    for b in range(a.bins):
        lines.append(f"{edges_km[b]:.3f},{edges_km[b + 1]:.3f},{allc[b]},{mutc[b]}")
    (out / "distance_histogram.csv").write_text("\n".join(lines) + "\n")

    # country matrix
    country = [v["country"] if v["country"] not in ("", "UNKNOWN") else None for v in verts]
    sizes = Counter(c for c in country if c)
    ranked = sorted(sizes, key=lambda c: (-sizes[c], c))[: a.top_k]
    grp = [ranked.index(c) if c in ranked else len(ranked) for c in country]
    labels = ranked + (["OTHER"] if len(ranked) in grp else [])
    mat = [[0] * len(labels) for _ in labels]
    for s, d in edges:
        mat[grp[s]][grp[d]] += 1
    lines = ["# follow counts; rows are follower countries, columns followee countries", "follower," + ",".join(labels)]
    for l, r in zip(labels, mat):
        lines.append(l + "," + ",".join(map(str, r)))
    (out / "country_matrix.csv").write_text("\n".join(lines) + "\n")

    # popularity
    code = [v["country"] if v["country"] else "UNKNOWN" for v in verts]
    base = Counter(code)
    foreign = Counter(code[d] for s, d in edges if code[s] != code[d])
    rows = sorted(base, key=lambda c: (-foreign[c] / base[c], c))
    lines = ["# cross-country in-follows per user of the followee's country",
             "rank,country,user_base,foreign_followers,score,popular"]
    flagged = 0
    for r, c in enumerate(rows):
        score = foreign[c] / base[c]
        pop = flagged < a.popular_k and c != "UNKNOWN" and base[c] > a.min_base and score > 0
        flagged += pop
        lines.append(f"{r + 1},{c},{base[c]},{foreign[c]},{score:.9f},{int(pop)}")
    (out / "popularity.csv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
