"""Labelled synthetic call-graph corpus.

Both classes share one generator: a random user-function call tree with
extra cross calls, plus system nodes drawn from sensitive and filler APIs.
Class signal comes from *motifs*: a motif picks one API from the class's
typical set and wires it to a sizeable fraction of the user functions.
By default only malware carries motifs (telephony, location and
code-loading APIs), while benign apps call sensitive APIs sparsely. With
zero motifs for both classes the two distributions coincide.
"""
from __future__ import annotations

import csv
import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .graph import FunctionCallGraph, NodeKind, save_fcg
from .models.labels import BENIGN, MALWARE

BENIGN_APIS = (
    "android.app.Activity.startActivity",
    "android.widget.Toast.show",
    "android.view.View.setOnClickListener",
    "android.content.SharedPreferences.edit",
    "android.net.ConnectivityManager.getActiveNetworkInfo",
    "java.net.URL.openConnection",
    "android.app.NotificationManager.notify",
    "android.media.MediaPlayer.start",
    "android.content.ContentResolver.query",
    "android.webkit.WebView.loadUrl",
)
MALWARE_APIS = (
    "android.telephony.SmsManager.sendTextMessage",
    "android.telephony.TelephonyManager.getDeviceId",
    "android.telephony.TelephonyManager.getSubscriberId",
    "android.location.LocationManager.getLastKnownLocation",
    "java.lang.Runtime.exec",
    "dalvik.system.DexClassLoader.loadClass",
    "android.app.admin.DevicePolicyManager.lockNow",
    "android.content.pm.PackageManager.setComponentEnabledSetting",
    "javax.crypto.Cipher.doFinal",
    "android.accounts.AccountManager.getAccounts",
)
SENSITIVE_APIS = BENIGN_APIS + MALWARE_APIS

FAMILIES = (
    "android.", "com.google.", "java.", "javax.", "org.xml.", "org.apache.",
    "junit.", "org.json.", "org.w3c.dom.", "dalvik.",
)
SYSTEM_PREFIXES = FAMILIES

# coarse functional clusters over API packages
CLUSTERS = (
    ("android.telephony.", 0), ("android.location.", 1), ("android.app.", 2),
    ("android.widget.", 3), ("android.view.", 3), ("android.content.", 4),
    ("android.net.", 5), ("java.net.", 5), ("android.webkit.", 5),
    ("android.media.", 6), ("java.lang.", 7), ("dalvik.", 7),
    ("javax.crypto.", 8), ("android.accounts.", 9), ("android.", 10),
    ("java.", 11), ("javax.", 11), ("org.", 12), ("com.google.", 13), ("junit.", 12),
)


def filler_apis(n: int = 300) -> list[str]:
    """Deterministic non-sensitive system API names spread over the families."""
    out = []
    for i in range(n):
        fam = FAMILIES[i % len(FAMILIES)]
        out.append(f"{fam}lib{i // len(FAMILIES)}.Util{i % 7}.call{i % 5}")
    return out


@dataclass
class SynthConfig:
    n_graphs: int = 200
    size_range: tuple[int, int] = (1200, 2000)
    malware_fraction: float = 0.5
    test_fraction: float = 0.25
    benign_motifs: int = 0
    malware_motifs: int = 3
    # motifs are drawn from the first ``motif_pool`` APIs of the class's typical set
    motif_pool: int = 4
    # fraction of user functions wired to a motif API, per class
    benign_fanin: tuple[float, float] = (0.15, 0.3)
    malware_fanin: tuple[float, float] = (0.35, 0.55)
    system_fraction: float = 0.3
    # chance that a class-atypical sensitive API still appears (with a single caller)
    cross_api_prob: float = 0.6
    extra_edge_ratio: float = 0.5
    seed: int = 0

    def __post_init__(self):
        self.size_range = tuple(self.size_range)
        self.benign_fanin = tuple(self.benign_fanin)
        self.malware_fanin = tuple(self.malware_fanin)
        lo, hi = self.size_range
        if not 2 <= lo <= hi:
            raise ValueError("size_range must satisfy 2 <= lo <= hi")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Sample:
    name: str
    label: int
    split: str
    graph: FunctionCallGraph = field(repr=False)


def synth_graph(rng: random.Random, n: int, label: int, cfg: SynthConfig, app: str) -> FunctionCallGraph:
    n_sys = min(n - 1, max(1, round(cfg.system_fraction * n)))
    n_user = n - n_sys
    typical, other = (MALWARE_APIS, BENIGN_APIS) if label == MALWARE else (BENIGN_APIS, MALWARE_APIS)
    n_motifs = cfg.malware_motifs if label == MALWARE else cfg.benign_motifs
    fanin = cfg.malware_fanin if label == MALWARE else cfg.benign_fanin

    pool = typical[:max(n_motifs, cfg.motif_pool)]
    motif_apis = rng.sample(pool, min(n_motifs, len(pool)))
    present = list(motif_apis)
    for api in typical + other:
        if api not in present and rng.random() < cfg.cross_api_prob:
            present.append(api)
    rng.shuffle(present)
    fill = filler_apis(max(300, n_sys))
    apis = (present + rng.sample(fill, n_sys))[:n_sys]

    g = FunctionCallGraph()
    users = [g.add_node(NodeKind.USER, f"com.{app}.C{i // 4}.m{i % 4}") for i in range(n_user)]
    systems = {api: g.add_node(NodeKind.SYSTEM, api) for api in apis}

    for i in range(1, n_user):
        g.add_edge(users[rng.randrange(i)], users[i])
    if n_user > 2:
        for _ in range(int(cfg.extra_edge_ratio * n_user)):
            u, v = rng.sample(users, 2)
            if not g.has_edge(u, v):
                g.add_edge(u, v)
    for api, s in systems.items():
        g.add_edge(rng.choice(users), s)
    for api in motif_apis:
        s = systems.get(api)
        if s is None:
            continue
        frac = rng.uniform(*fanin)
        for u in rng.sample(users, max(1, round(frac * n_user))):
            if not g.has_edge(u, s):
                g.add_edge(u, s)
    return g


def synth_corpus(cfg: SynthConfig) -> list[Sample]:
    rng = random.Random(cfg.seed)
    n_mal = round(cfg.n_graphs * cfg.malware_fraction)
    labels = [MALWARE] * n_mal + [BENIGN] * (cfg.n_graphs - n_mal)
    rng.shuffle(labels)
    n_test = round(cfg.n_graphs * cfg.test_fraction)
    out = []
    for i, label in enumerate(labels):
        n = rng.randint(*cfg.size_range)
        g = synth_graph(rng, n, label, cfg, f"app{i:04d}")
        split = "test" if i >= cfg.n_graphs - n_test else "train"
        out.append(Sample(f"g{i:04d}", label, split, g))
    return out


def write_corpus(samples: list[Sample], out_dir, cfg: SynthConfig | None = None) -> Path:
    out = Path(out_dir)
    (out / "graphs").mkdir(parents=True, exist_ok=True)
    for s in samples:
        (out / "graphs" / f"{s.name}.json").write_bytes(save_fcg(s.graph))
    with open(out / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "label", "split"])
        for s in samples:
            w.writerow([s.name, s.label, s.split])
    (out / "sensitive_apis.txt").write_text("\n".join(SENSITIVE_APIS) + "\n", encoding="utf-8")
    (out / "system_prefixes.txt").write_text("\n".join(SYSTEM_PREFIXES) + "\n", encoding="utf-8")
    (out / "family_map.tsv").write_text(
        "".join(f"{p}\t{i}\n" for i, p in enumerate(FAMILIES)), encoding="utf-8")
    (out / "cluster_map.tsv").write_text(
        "".join(f"{p}\t{i}\n" for p, i in CLUSTERS), encoding="utf-8")
    if cfg is not None:
        (out / "synth_config.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=1) + "\n")
    return out
