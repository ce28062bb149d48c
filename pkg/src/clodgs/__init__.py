"""Continuous level-of-detail Gaussian splatting on the CPU.

A single scene renders at any detail level through one scalar knob: each
primitive carries a learnable distance-decay parameter that attenuates its
opacity with normalized camera distance, and a matching threshold culls what
has faded out. Training samples virtual viewing distances and regularizes the
rendered-primitive count so quality degrades smoothly instead of popping.
"""

from .backend import available_backends, get_backend, set_backend
from .camera import Camera, orbit_camera
from .clod import LodQuery
from .metrics import dssim, psnr, ssim
from .model import CameraSet, GaussianPrimitive, GaussianScene
from .ply import load_ply, save_ply
from .render import RenderArtifacts, RenderConfig, render, render_with_gradients
from .synth import SynthSpec, generate_camera_set, generate_synthetic_scene
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Camera",
    "CameraSet",
    "GaussianPrimitive",
    "GaussianScene",
    "LodQuery",
    "RenderArtifacts",
    "RenderConfig",
    "SynthSpec",
    "TrainConfig",
    "available_backends",
    "dssim",
    "generate_camera_set",
    "generate_synthetic_scene",
    "get_backend",
    "load_ply",
    "orbit_camera",
    "psnr",
    "render",
    "render_with_gradients",
    "save_ply",
    "set_backend",
    "ssim",
    "train",
    "__version__",
]
