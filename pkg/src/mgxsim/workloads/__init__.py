"""Workload trace generators and the catalog mapping names to them."""

from __future__ import annotations

from ..errors import ConfigError
from .cnn import cnn_inference_trace, cnn_training_trace
from .gact import gact_trace
from .graph import PRESETS, NetworkGraph, load_graph, load_preset
from .h264 import DEFAULT_PATTERN, h264_trace
from .payload import payload_for
from .pruned import pruned_trace
from .rnn import rnn_trace, unroll
from .stream import streaming_trace
from .trace import Trace, TraceEvent, VnSource, export_trace, import_trace

__all__ = [
    "NetworkGraph",
    "PRESETS",
    "Trace",
    "TraceEvent",
    "VnSource",
    "build_trace",
    "cnn_inference_trace",
    "cnn_training_trace",
    "export_trace",
    "gact_trace",
    "h264_trace",
    "import_trace",
    "load_graph",
    "load_preset",
    "payload_for",
    "pruned_trace",
    "rnn_trace",
    "streaming_trace",
    "unroll",
]


def build_trace(workload: str, *, seed: int = 0, mac_granularity: int = 1024,
                args: dict | None = None) -> Trace:
    """Resolve a workload name to a trace.

    Names: a network preset (inference/training chosen by args["task"]), a
    .json network file, a previously exported .csv trace, or one of the
    special generators rnn | pruned | h264 | gact | stream. Generator keyword
    arguments come through `args`.
    """
    a = dict(args or {})
    task = a.pop("task", "inference")
    common = {"seed": seed, "mac_granularity": mac_granularity}
    if workload.endswith(".csv"):
        return import_trace(workload)
    if workload.endswith(".json"):
        graph = load_graph(workload)
    elif workload in PRESETS:
        graph = load_preset(workload)
    else:
        graph = None
    if graph is not None:
        if task == "training":
            return cnn_training_trace(graph, a.pop("iterations", 1), **common, **a)
        if task != "inference":
            raise ConfigError(f"unknown task {task!r} (inference|training)")
        return cnn_inference_trace(graph, a.pop("num_inputs", 1), **common, **a)
    if workload == "rnn":
        cell = load_graph(a.pop("cell")) if "cell" in a else load_preset("micro")
        return rnn_trace(cell, a.pop("timesteps", 4), task=task, **common, **a)
    if workload == "pruned":
        return pruned_trace(**common, **a)
    if workload == "h264":
        return h264_trace(a.pop("pattern", DEFAULT_PATTERN), **common, **a)
    if workload == "gact":
        return gact_trace(**common, **a)
    if workload == "stream":
        return streaming_trace(a.pop("total_bytes", 10 << 20), **common, **a)
    raise ConfigError(
        f"unknown workload {workload!r}; expected a preset ({', '.join(PRESETS)}), "
        "a .json network, a .csv trace, or rnn|pruned|h264|gact|stream"
    )
