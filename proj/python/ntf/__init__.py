"""Neural transient fields for non-line-of-sight imaging."""

from ._ntf import (
    DepthError,
    DepthMap,
    GridSpec,
    NtfError,
    Params,
    RunConfig,
    Transient,
    Volume,
    backproject,
    depth,
    depth_mae,
    extract_volume,
    init_params,
    mesh,
    projection,
    query,
    render,
    scene_volume,
    simulate,
    train,
)


def config(**overrides):
    """RunConfig with keyword overrides, e.g. config(scan=8, scene="plane")."""
    c = RunConfig()
    for key, value in overrides.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        c.set(key, str(value))
    return c


__all__ = [
    "DepthError",
    "DepthMap",
    "GridSpec",
    "NtfError",
    "Params",
    "RunConfig",
    "Transient",
    "Volume",
    "backproject",
    "config",
    "depth",
    "depth_mae",
    "extract_volume",
    "init_params",
    "mesh",
    "projection",
    "query",
    "render",
    "scene_volume",
    "simulate",
    "train",
]
