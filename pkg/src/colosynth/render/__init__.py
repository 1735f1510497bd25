from .params import CameraIntrinsics, LightParams, MaterialParams, PostFxParams
from .postfx import apply_postfx
from .renderer import FramePacket, Scene, render_frame
from .shading import shade

__all__ = [
    "CameraIntrinsics",
    "FramePacket",
    "LightParams",
    "MaterialParams",
    "PostFxParams",
    "Scene",
    "apply_postfx",
    "render_frame",
    "shade",
]
