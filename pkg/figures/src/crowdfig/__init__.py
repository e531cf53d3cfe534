"""Figure rendering for crowdcast CSV outputs."""

from crowdfig.plots import FigureSpec, KINDS, render

__all__ = ["FigureSpec", "KINDS", "render"]
