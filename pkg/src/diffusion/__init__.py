"""离散扩散：噪声调度、前向加噪、反向采样与变分下界"""

from src.diffusion.forward import contagion_conditional, corrupt, homophily_edge_prob
from src.diffusion.schedule import cumulative_kernel, make_schedule, posterior_flip, step_kernel

__all__ = [
    "contagion_conditional",
    "corrupt",
    "homophily_edge_prob",
    "cumulative_kernel",
    "make_schedule",
    "posterior_flip",
    "step_kernel",
]
