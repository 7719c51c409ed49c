"""RF link model, bottleneck routing through the deployed mesh, and capacity."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .config import LinkModel
from .irm import CommsClass, Irm, NodeKind, classify_checkpoint
from .kernels import all_pairs_widest, count_wall_cells

SPEED_OF_LIGHT = 299_792_458.0
_FSPL_CONST = 20.0 * math.log10(4.0 * math.pi / SPEED_OF_LIGHT)


def fspl_db(distance_m: float, frequency_hz: float) -> float:
    """Free-space path loss, Friis form."""
    return 20.0 * math.log10(distance_m) + 20.0 * math.log10(frequency_hz) + _FSPL_CONST


def link_snr(a, b, model: LinkModel, occupancy=None, tx_power_dbm: float | None = None) -> float:
    """Predicted SNR in dB between two positions, capped at ``model.snr_cap_db``.

    Every occupied grid cell crossed by the straight segment costs
    ``wall_damping_db``. The endpoints are put in a canonical order before
    marching so the result is exactly symmetric.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if tuple(b) < tuple(a):
        a, b = b, a
    tx = model.tx_power_dbm if tx_power_dbm is None else tx_power_dbm
    d = float(np.linalg.norm(b - a))
    if d == 0.0:
        return model.snr_cap_db
    walls = 0
    if occupancy is not None and occupancy.grid.size:
        walls = count_wall_cells(occupancy.grid, occupancy.cell_size, a, b)
    snr = tx - fspl_db(d, model.frequency_hz) - walls * model.wall_damping_db - model.noise_floor_dbm
    return min(snr, model.snr_cap_db)


def capacity(snr_db: float, bandwidth_hz: float) -> float:
    """Shannon capacity in bit/s; 0 for ``-inf`` dB."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    if snr_db == -math.inf:
        return 0.0
    # log1p keeps strict monotonicity at very low SNR
    return bandwidth_hz * math.log1p(10.0 ** (snr_db / 10.0)) / math.log(2.0)


def predict_coverage_radius(tx_power_dbm: float, model: LinkModel, snr_threshold_db: float) -> float:
    """Largest distance with free-space SNR >= threshold (closed-form FSPL inversion)."""
    if snr_threshold_db > model.snr_cap_db:
        return 0.0
    budget = tx_power_dbm - model.noise_floor_dbm - snr_threshold_db
    return 10.0 ** ((budget - 20.0 * math.log10(model.frequency_hz) - _FSPL_CONST) / 20.0)


@dataclass
class RadioNode:
    radio_id: str
    position: np.ndarray
    is_base: bool = False
    tx_power_dbm: float = 20.0
    carried_by: str | None = None


class MeshState:
    """Deployed radios (base first), their link SNRs and bottleneck SNR to the base."""

    def __init__(self, radios: list[RadioNode], model: LinkModel, occupancy=None, revision: int = 0):
        deployed = [r for r in radios if r.carried_by is None]
        bases = [r for r in deployed if r.is_base]
        if len(bases) != 1:
            raise ValueError("mesh needs exactly one base radio")
        self.radios = bases + [r for r in deployed if not r.is_base]
        self.model = model
        self.occupancy = occupancy
        self.revision = revision
        n = len(self.radios)
        m = np.full((n, n), -np.inf)
        for i in range(n):
            for j in range(i + 1, n):
                tx = min(self.radios[i].tx_power_dbm, self.radios[j].tx_power_dbm)
                s = link_snr(self.radios[i].position, self.radios[j].position, model, occupancy, tx)
                if s >= model.link_floor_db:
                    m[i, j] = m[j, i] = s
        self.link_snr_db = m
        self.widest = all_pairs_widest(m)
        self.bottleneck_db = self.widest[0].copy()

    def __len__(self):
        return len(self.radios)

    def index(self, radio_id: str) -> int:
        for k, r in enumerate(self.radios):
            if r.radio_id == radio_id:
                return k
        raise KeyError(radio_id)

    def with_radio(self, radio: RadioNode) -> "MeshState":
        return MeshState(self.radios + [radio], self.model, self.occupancy, self.revision + 1)

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["a", "b", "snr_db"])
            n = len(self.radios)
            for i in range(n):
                for j in range(i + 1, n):
                    w.writerow([self.radios[i].radio_id, self.radios[j].radio_id, self.link_snr_db[i, j]])


def bottleneck_snr(mesh: MeshState, from_node: int, to_base: bool = True) -> float | None:
    """Best-route weakest-link SNR from radio ``from_node`` to the base; ``None`` if unreachable.

    The base itself reports ``+inf``.
    """
    v = mesh.bottleneck_db[from_node] if to_base else None
    if v is None or v == -math.inf:
        return None
    return float(v)


class LinkCache:
    """Memoised radio-to-position SNRs; deployed radios and graph nodes never move."""

    def __init__(self, model: LinkModel, occupancy=None):
        self.model = model
        self.occupancy = occupancy
        self._cache: dict[tuple, float] = {}

    def get(self, radio: RadioNode, key, position) -> float:
        k = (radio.radio_id, key)
        v = self._cache.get(k)
        if v is None:
            v = link_snr(radio.position, position, self.model, self.occupancy, radio.tx_power_dbm)
            self._cache[k] = v
        return v


def receiver_bottleneck(mesh: MeshState, position, key=None, cache: LinkCache | None = None):
    """Bottleneck SNR from the base to a receiver at ``position`` through the deployed mesh.

    Returns ``(snr_db or None, first_hop_radio_index or None)``; the first hop
    is the radio the receiver attaches to on the best route (lowest index on
    ties).
    """
    best, hop = -math.inf, None
    for k, r in enumerate(mesh.radios):
        if cache is not None and key is not None:
            s = cache.get(r, key, position)
        else:
            s = link_snr(r.position, position, mesh.model, mesh.occupancy, r.tx_power_dbm)
        if s < mesh.model.link_floor_db:
            continue
        v = min(s, mesh.bottleneck_db[k])
        if v > best:
            best, hop = v, k
    if best == -math.inf:
        return None, None
    return float(best), hop


def update_checkpoints(irm: Irm, mesh: MeshState, cache: LinkCache | None = None,
                       t_strong: float = 20.0, t_none: float = 5.0) -> int:
    """Re-annotate every explored IRM node with its bottleneck SNR; returns the number changed.

    Visited nodes become comms checkpoints. Only deployed radios count.
    """
    changed = 0
    for n in sorted(irm.nodes):
        node = irm.nodes[n]
        if not node.explored:
            continue
        if node.kind == NodeKind.BASE:
            snr = math.inf
        else:
            s, _ = receiver_bottleneck(mesh, node.position, n, cache)
            snr = -math.inf if s is None else s
        cls = classify_checkpoint(snr, t_strong, t_none)
        kind = NodeKind.CHECKPOINT if node.kind == NodeKind.VISITED else node.kind
        if (node.snr_db, node.comms_class, node.kind) != (snr, cls, kind):
            node.snr_db, node.comms_class, node.kind = snr, cls, kind
            node.snr_stamp = mesh.revision
            changed += 1
    if changed:
        irm.bump()
    return changed


def class_order(c: CommsClass | None) -> int:
    return {None: -1, CommsClass.NONE: 0, CommsClass.WEAK: 1, CommsClass.STRONG: 2}[c]
