"""Shapley-value attribution over tokens, patches, and graph nodes.

A player is one removable input unit: a text token (masked to the <mask>
embedding when absent), an image patch (zeroed; patches group into four
quadrant players when an image has more than 16), or a scene-graph node
(feature row zeroed, structure intact). The value of a coalition is the
model's fake-class probability with every absent player masked, so a
positive Shapley value means the player pushes toward fake = 1.

Exact enumeration covers up to 12 players; larger sets fall back to the
permutation estimator (with a warning when the caller asked for exact).
The permutation estimator enumerates all n! orders deterministically when
n <= 5 and the sample budget allows, which reproduces the exact values.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from math import factorial
from typing import Callable, Sequence

import numpy as np

from .encoder import MASK_ID
from .errors import ConfigError, InputError
from .model import ModelConfig, PreparedExample, forward_probability
from .rng import stream

EXACT_PLAYER_LIMIT = 12
PATCH_GROUP_LIMIT = 16


@dataclass(frozen=True)
class Player:
    kind: str  # token | patch | tsg_node | vsg_node
    index: int
    detail: str  # the token text, patch pixel rect, or node label
    targets: tuple[int, ...]  # underlying positions this player masks


@dataclass(frozen=True)
class PlayerAttribution:
    kind: str
    index: int
    detail: str
    phi: float
    stderr: float | None = None


@dataclass(frozen=True)
class AttributionReport:
    base_value: float
    full_value: float
    method: str  # "exact" or "permutation"
    players: tuple[PlayerAttribution, ...]
    n_samples: int | None = None
    seed: int | None = None

    @property
    def phi_total(self) -> float:
        return sum(p.phi for p in self.players)


def enumerate_players(prep: PreparedExample) -> list[Player]:
    players: list[Player] = []
    for i, tok in enumerate(prep.tokens):
        players.append(Player("token", i, tok, (i,)))
    n_patches = prep.patches.shape[0]
    if n_patches > PATCH_GROUP_LIMIT and prep.patch_grid is not None:
        grid = prep.patch_grid
        per_row = grid.width // grid.patch_size
        rows = grid.height // grid.patch_size
        groups: dict[int, list[int]] = {0: [], 1: [], 2: [], 3: []}
        for idx in range(n_patches):
            r, c = divmod(idx, per_row)
            quadrant = (2 if r >= (rows + 1) // 2 else 0) + (1 if c >= (per_row + 1) // 2 else 0)
            groups[quadrant].append(idx)
        for quadrant in range(4):
            idxs = groups[quadrant]
            if not idxs:
                continue
            x0 = min(grid.patch_bounds(i)[0] for i in idxs)
            y0 = min(grid.patch_bounds(i)[1] for i in idxs)
            x1 = max(grid.patch_bounds(i)[2] for i in idxs)
            y1 = max(grid.patch_bounds(i)[3] for i in idxs)
            players.append(Player("patch", quadrant, f"({x0},{y0})-({x1},{y1})",
                                  tuple(idxs)))
    else:
        for idx in range(n_patches):
            if prep.patch_grid is not None:
                x0, y0, x1, y1 = prep.patch_grid.patch_bounds(idx)
                detail = f"({x0},{y0})-({x1},{y1})"
            else:
                detail = f"patch {idx}"
            players.append(Player("patch", idx, detail, (idx,)))
    for i, node in enumerate(prep.tsg.nodes):
        players.append(Player("tsg_node", i, node.label, (i,)))
    for i, node in enumerate(prep.vsg.nodes):
        players.append(Player("vsg_node", i, node.label, (i,)))
    return players


def coalition_value_fn(prep: PreparedExample, params: dict, cfg: ModelConfig,
                       players: Sequence[Player]) -> Callable[[int], float]:
    """Bitmask -> model probability with absent players masked. Memoized."""
    if cfg.fusion != "base":
        raise ConfigError("attribution requires the base fusion variant; "
                          "cross-modal merged graphs have no per-modality players")
    cache: dict[int, float] = {}

    def value(mask: int) -> float:
        hit = cache.get(mask)
        if hit is not None:
            return hit
        token_ids = list(prep.token_ids)
        patches = prep.patches.copy()
        tsg_feat = prep.tsg_feat.copy() if prep.tsg_feat is not None else None
        vsg_feat = prep.vsg_feat.copy() if prep.vsg_feat is not None else None
        for i, player in enumerate(players):
            if mask & (1 << i):
                continue
            if player.kind == "token":
                for t in player.targets:
                    token_ids[t] = MASK_ID
            elif player.kind == "patch":
                for t in player.targets:
                    patches[t, :] = 0.0
            elif player.kind == "tsg_node":
                for t in player.targets:
                    tsg_feat[t, :] = 0.0
            elif player.kind == "vsg_node":
                for t in player.targets:
                    vsg_feat[t, :] = 0.0
        p = float(forward_probability(
            prep, params, cfg, training=False,
            token_ids_override=token_ids, patches_override=patches,
            tsg_feat_override=tsg_feat, vsg_feat_override=vsg_feat).data)
        cache[mask] = p
        return p

    return value


# ---------------------------------------------------------------------------
# estimators over an arbitrary set-valued game


def shapley_exact_values(value: Callable[[int], float], n: int) -> np.ndarray:
    """Exact Shapley values of a bitmask game with n players."""
    if n < 1:
        raise InputError("need at least one player")
    if n > EXACT_PLAYER_LIMIT:
        raise InputError(f"exact enumeration supports up to {EXACT_PLAYER_LIMIT} players")
    vals = np.array([value(mask) for mask in range(1 << n)])
    weights = np.array([factorial(s) * factorial(n - 1 - s) / factorial(n)
                        for s in range(n)])
    phi = np.zeros(n)
    for mask in range(1 << n):
        size = bin(mask).count("1")
        for i in range(n):
            bit = 1 << i
            if mask & bit:
                continue
            phi[i] += weights[size] * (vals[mask | bit] - vals[mask])
    return phi


def shapley_permutation_values(value: Callable[[int], float], n: int,
                               n_samples: int, seed: int
                               ) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo permutation estimate: (phi, per-player stderr).

    When n <= 5 and n_samples covers n!, every permutation is visited once
    in lexicographic order, making the estimate exact.
    """
    if n < 1:
        raise InputError("need at least one player")
    if n_samples < 1:
        raise InputError("need at least one permutation sample")
    total = factorial(n)
    if n <= 5 and n_samples >= total:
        perms = itertools.permutations(range(n))
    else:
        rng = stream(seed, "shapley-perm")
        perms = (tuple(int(x) for x in rng.permutation(n)) for _ in range(n_samples))
    marginals: list[list[float]] = [[] for _ in range(n)]
    for perm in perms:
        mask = 0
        prev = value(mask)
        for player in perm:
            mask |= 1 << player
            cur = value(mask)
            marginals[player].append(cur - prev)
            prev = cur
    phi = np.array([np.mean(m) for m in marginals])
    stderr = np.array([
        float(np.std(m, ddof=1) / np.sqrt(len(m))) if len(m) > 1 else 0.0
        for m in marginals])
    return phi, stderr


# ---------------------------------------------------------------------------
# attribution of a prepared example


def explain_example(prep: PreparedExample, params: dict, cfg: ModelConfig,
                    method: str = "auto", n_samples: int = 200,
                    seed: int = 0) -> AttributionReport:
    players = enumerate_players(prep)
    n = len(players)
    if n == 0:
        raise InputError("example has no players to attribute")
    if method not in ("auto", "exact", "permutation"):
        raise ConfigError(f"unknown attribution method {method!r}")
    value = coalition_value_fn(prep, params, cfg, players)
    use_exact = method == "exact" or (method == "auto" and n <= EXACT_PLAYER_LIMIT)
    if use_exact and n > EXACT_PLAYER_LIMIT:
        warnings.warn(
            f"{n} players exceed the exact enumeration limit "
            f"({EXACT_PLAYER_LIMIT}); falling back to permutation sampling",
            stacklevel=2)
        use_exact = False
    base = value(0)
    full = value((1 << n) - 1)
    if use_exact:
        phi = shapley_exact_values(value, n)
        attributed = tuple(
            PlayerAttribution(p.kind, p.index, p.detail, float(v))
            for p, v in zip(players, phi))
        return AttributionReport(base_value=base, full_value=full, method="exact",
                                 players=attributed)
    phi, stderr = shapley_permutation_values(value, n, n_samples, seed)
    attributed = tuple(
        PlayerAttribution(p.kind, p.index, p.detail, float(v), float(se))
        for p, v, se in zip(players, phi, stderr))
    return AttributionReport(base_value=base, full_value=full, method="permutation",
                             players=attributed, n_samples=n_samples, seed=seed)


# ---------------------------------------------------------------------------
# rendering


def highlight_class(phi: float, max_abs: float) -> str:
    """none / fake / fake-strong / real / real-strong by sign and share of
    the largest magnitude."""
    if max_abs <= 0.0 or abs(phi) < 1e-12:
        return "none"
    side = "fake" if phi > 0 else "real"
    return f"{side}-strong" if abs(phi) >= 0.5 * max_abs else side


def report_to_doc(report: AttributionReport) -> dict:
    """JSON-ready document; stderr appears only for permutation output."""
    players = []
    for p in report.players:
        entry = {"kind": p.kind, "index": p.index, "text_or_coords": p.detail,
                 "phi": p.phi}
        if p.stderr is not None:
            entry["stderr"] = p.stderr
        players.append(entry)
    return {"base_value": report.base_value, "full_value": report.full_value,
            "method": report.method, "players": players}


def render_text(report: AttributionReport) -> str:
    """Plain-text view: tokens inline with per-token markers, then the
    remaining players one per line."""
    max_abs = max((abs(p.phi) for p in report.players), default=0.0)

    def mark(p: PlayerAttribution) -> str:
        cls = highlight_class(p.phi, max_abs)
        if cls == "none":
            return ""
        sign = "+" if p.phi > 0 else "-"
        strong = "*" if cls.endswith("strong") else ""
        return f"[{sign}{abs(p.phi):.4f}{strong}]"

    lines = [f"attribution method={report.method} "
             f"base={report.base_value:.6f} full={report.full_value:.6f}"]
    tokens = [p for p in report.players if p.kind == "token"]
    if tokens:
        lines.append("text: " + " ".join(p.detail + mark(p) for p in tokens))
    for kind, title in (("patch", "patches"), ("tsg_node", "tsg nodes"),
                        ("vsg_node", "vsg nodes")):
        group = [p for p in report.players if p.kind == kind]
        if not group:
            continue
        lines.append(f"{title}:")
        for p in group:
            se = f" stderr={p.stderr:.4f}" if p.stderr is not None else ""
            lines.append(f"  {p.index} {p.detail}: {p.phi:+.6f} "
                         f"{highlight_class(p.phi, max_abs)}{se}")
    return "\n".join(lines) + "\n"
