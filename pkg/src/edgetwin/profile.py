"""DNN layer profiles: logical-layer merging and per-layer delay derivation.

A profile describes the full-size network deployed at the edge and the shallow
network on the device. The shallow network shares the first ``exit_index``
logical layers with the full-size network and ends in a single exit-branch
layer. Layers with negligible execution time but large resizing effect
(pooling / unpooling) are merged into neighbouring layers so that every
remaining layer boundary is a meaningful offload point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

from .config import SimConfig

LAYER_KINDS = ("compute", "pool_down", "pool_up", "exit_branch")


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class DnnLayer:
    name: str
    kind: str
    flops: float
    output_bits: int

    def __post_init__(self) -> None:
        if self.kind not in LAYER_KINDS:
            raise ProfileError(f"unknown layer kind {self.kind!r}")
        if self.flops < 0:
            raise ProfileError(f"layer {self.name}: negative flops")
        if self.output_bits <= 0:
            raise ProfileError(f"layer {self.name}: output_bits must be positive")

    @property
    def negligible(self) -> bool:
        return self.kind in ("pool_down", "pool_up")


def merge_negligible_layers(layers: list[DnnLayer]) -> list[DnnLayer]:
    """Fold zero-cost resizing layers into their compute neighbours.

    A downsizing layer joins its predecessor (the boundary after the smaller
    output survives); an upsizing layer joins its successor (the boundary
    before the larger input survives). Work is conserved: merged flops are
    summed.
    """
    merged: list[DnnLayer] = []
    for layer in layers:
        if layer.kind == "pool_down":
            if not merged:
                raise ProfileError("downsizing layer cannot be first")
            prev = merged.pop()
            merged.append(
                DnnLayer(prev.name + "+" + layer.name, prev.kind,
                         prev.flops + layer.flops, layer.output_bits)
            )
        else:
            merged.append(layer)
    out: list[DnnLayer] = []
    for layer in reversed(merged):
        if layer.kind == "pool_up":
            if not out:
                raise ProfileError("upsizing layer cannot be last")
            nxt = out.pop()
            out.append(
                DnnLayer(layer.name + "+" + nxt.name, nxt.kind,
                         layer.flops + nxt.flops, nxt.output_bits)
            )
        else:
            out.append(layer)
    return list(reversed(out))


@dataclass(frozen=True)
class DnnProfile:
    """Merged logical layers plus derived per-layer delays.

    ``device_delay_slots[l-1]`` is the on-device execution time of shallow
    layer l (l = 1..exit_index+1) in whole slots; ``edge_delays_s[l-1]`` is
    the edge execution time of full-size layer l in seconds (unrounded).
    """

    full_layers: tuple[DnnLayer, ...]
    exit_layer: DnnLayer
    exit_index: int
    input_bits: int
    device_delay_slots: tuple[int, ...]
    edge_delays_s: tuple[float, ...]
    slot_duration_s: float

    @property
    def layer_count(self) -> int:
        return len(self.full_layers)

    @property
    def device_only_decision(self) -> int:
        """The decision index meaning device-only inference (exit_index + 1)."""
        return self.exit_index + 1

    def upload_bits(self, x: int) -> int:
        """Size of the intermediate result uploaded under decision x <= exit_index."""
        if x == 0:
            return self.input_bits
        return self.full_layers[x - 1].output_bits

    def device_slots(self, x: int) -> int:
        """Slots of on-device inference under decision x (0..exit_index+1)."""
        return sum(self.device_delay_slots[:x])

    def device_delay_s(self, x: int) -> float:
        return self.device_slots(x) * self.slot_duration_s

    def edge_delay_s(self, x: int) -> float:
        """Edge execution time of the remaining full-size layers; 0 if device-only."""
        if x == self.device_only_decision:
            return 0.0
        return sum(self.edge_delays_s[x:])

    def edge_remaining_cycles(self, x: int) -> float:
        """CPU cycles the edge server must spend on a task offloaded at x."""
        if x == self.device_only_decision:
            return 0.0
        return sum(layer.flops for layer in self.full_layers[x:])


def derive_delays(
    layers: list[DnnLayer],
    exit_layer: DnnLayer,
    exit_index: int,
    cfg: SimConfig,
) -> DnnProfile:
    """Build a profile from merged logical layers.

    Device delays are rounded up to whole slots; edge delays stay at full
    resolution. A layer whose device time would round to zero slots is
    rejected because it would collapse a decision epoch.
    """
    if not 1 <= exit_index < len(layers):
        raise ProfileError(
            f"exit_index {exit_index} out of range for {len(layers)} layers"
        )
    for layer in layers:
        if layer.negligible:
            raise ProfileError("merge negligible layers before deriving delays")
    shallow = list(layers[:exit_index]) + [exit_layer]
    device_slots = []
    for layer in shallow:
        if layer.flops <= 0:
            raise ProfileError(f"layer {layer.name}: on-device layer needs flops > 0")
        seconds = layer.flops / cfg.device_freq_hz
        slots = math.ceil(round(seconds / cfg.slot_duration_s, 9))
        if slots < 1:
            raise ProfileError(f"layer {layer.name}: device delay rounds to 0 slots")
        device_slots.append(slots)
    edge_delays = tuple(layer.flops / cfg.edge_freq_hz for layer in layers)
    profile = DnnProfile(
        full_layers=tuple(layers),
        exit_layer=exit_layer,
        exit_index=exit_index,
        input_bits=0,  # replaced by caller
        device_delay_slots=tuple(device_slots),
        edge_delays_s=edge_delays,
        slot_duration_s=cfg.slot_duration_s,
    )
    return profile


def _with_input_bits(profile: DnnProfile, input_bits: int) -> DnnProfile:
    return DnnProfile(
        full_layers=profile.full_layers,
        exit_layer=profile.exit_layer,
        exit_index=profile.exit_index,
        input_bits=input_bits,
        device_delay_slots=profile.device_delay_slots,
        edge_delays_s=profile.edge_delays_s,
        slot_duration_s=profile.slot_duration_s,
    )


def parse_profile_text(text: str, cfg: SimConfig) -> DnnProfile:
    """Parse a layer profile file.

    Format, one record per line, ``#`` comments allowed::

        input_bits <bits>
        layer <name> <kind> <flops> <output_bits>
        exit  <name> <flops> <output_bits>

    Raw layers appear in network order. The single ``exit`` record is placed
    directly after the raw layer at which the exit branch attaches; the exit
    index is the logical (merged) index of that layer.
    """
    input_bits = None
    raw: list[DnnLayer] = []
    exit_layer = None
    exit_after_raw = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "input_bits":
                input_bits = int(parts[1])
            elif parts[0] == "layer":
                raw.append(DnnLayer(parts[1], parts[2], float(parts[3]), int(parts[4])))
            elif parts[0] == "exit":
                if exit_layer is not None:
                    raise ProfileError("multiple exit records")
                if not raw:
                    raise ProfileError("exit record before any layer")
                exit_layer = DnnLayer(parts[1], "exit_branch", float(parts[2]), int(parts[3]))
                exit_after_raw = len(raw) - 1
            else:
                raise ProfileError(f"unknown record {parts[0]!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ProfileError):
                raise
            raise ProfileError(f"line {lineno}: {exc}") from exc
    if input_bits is None:
        raise ProfileError("missing input_bits record")
    if exit_layer is None:
        raise ProfileError("missing exit record")

    merged = merge_negligible_layers(raw)
    # Map the raw attach layer to its logical index and require that it ends
    # its logical layer, otherwise the exit point would sit inside a merge.
    attach_name = raw[exit_after_raw].name
    exit_index = None
    for i, layer in enumerate(merged):
        if layer.name.split("+")[-1] == attach_name:
            exit_index = i + 1
            break
        if attach_name in layer.name.split("+"):
            raise ProfileError(
                f"exit attaches inside merged layer {layer.name!r}; move it to the boundary"
            )
    if exit_index is None:
        raise ProfileError("could not locate exit attach layer after merging")
    profile = derive_delays(merged, exit_layer, exit_index, cfg)
    return _with_input_bits(profile, input_bits)


def load_profile(path: str, cfg: SimConfig) -> DnnProfile:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_profile_text(fh.read(), cfg)


def default_profile(cfg: SimConfig) -> DnnProfile:
    """The shipped AlexNet-like profile (7 logical layers, exit after layer 2)."""
    text = resources.files("edgetwin.data").joinpath("alexnet.profile").read_text()
    return parse_profile_text(text, cfg)
