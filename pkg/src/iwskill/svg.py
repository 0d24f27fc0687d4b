"""Minimal SVG scene rendering: obstacle layouts, prior bands, and paths.

Everything is drawn in world coordinates through a single y-flip transform,
so callers pass meters. Output is deterministic text for a given scene.
"""

import io

import numpy as np

from .environment import Box, Environment, Sphere


class SvgScene:
    """Collects shapes in world coordinates, renders one standalone SVG."""

    def __init__(self, width_px: int = 640):
        self.width_px = width_px
        self._shapes: list = []
        self._points: list = []

    def _track(self, pts) -> None:
        for p in np.atleast_2d(np.asarray(pts, dtype=float)):
            self._points.append(p[:2])

    def polyline(self, pts, color: str = "#1f77b4", width: float = 2.0,
                 opacity: float = 1.0, dashed: bool = False) -> None:
        pts = np.asarray(pts, dtype=float)
        self._track(pts)
        self._shapes.append(("polyline", pts.copy(), color, width, opacity, dashed))

    def polygon(self, pts, color: str = "#aec7e8", opacity: float = 0.5) -> None:
        pts = np.asarray(pts, dtype=float)
        self._track(pts)
        self._shapes.append(("polygon", pts.copy(), color, opacity))

    def circle(self, center, radius: float, color: str = "#d62728",
               opacity: float = 0.9) -> None:
        c = np.asarray(center, dtype=float)
        self._track([c - radius, c + radius])
        self._shapes.append(("circle", c.copy(), radius, color, opacity))

    def rect(self, lo, hi, color: str = "#d62728", opacity: float = 0.9) -> None:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        self._track([lo, hi])
        self._shapes.append(("rect", lo.copy(), hi.copy(), color, opacity))

    def environment(self, env: Environment, color: str = "#d62728") -> None:
        for obs in env.obstacles:
            if isinstance(obs, Sphere):
                self.circle(obs.center[:2], obs.radius, color=color)
            elif isinstance(obs, Box):
                self.rect(obs.lo[:2], obs.hi[:2], color=color)

    def band(self, means: np.ndarray, half_widths: np.ndarray,
             color: str = "#aec7e8", opacity: float = 0.5) -> None:
        """Shaded corridor around a 2-D path: each node offset by its
        half-width along the local path normal."""
        means = np.asarray(means, dtype=float)
        tangents = np.gradient(means, axis=0)
        norms = np.linalg.norm(tangents, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        normal = np.stack([-tangents[:, 1], tangents[:, 0]], axis=1) / norms
        upper = means + half_widths[:, None] * normal
        lower = means - half_widths[:, None] * normal
        self.polygon(np.vstack([upper, lower[::-1]]), color=color, opacity=opacity)

    def render(self) -> str:
        if not self._points:
            raise ValueError("nothing to render")
        pts = np.asarray(self._points)
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        span = np.maximum(hi - lo, 1e-9)
        margin = 0.05 * float(span.max())
        lo, hi = lo - margin, hi + margin
        span = hi - lo
        scale = self.width_px / span[0]
        height_px = span[1] * scale

        def sx(x):
            return (x - lo[0]) * scale

        def sy(y):  # flip: world +y is up
            return (hi[1] - y) * scale

        out = io.StringIO()
        out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width_px:.0f}" '
                  f'height="{height_px:.0f}" viewBox="0 0 {self.width_px:.0f} {height_px:.0f}">\n')
        out.write('<rect width="100%" height="100%" fill="white"/>\n')
        for shape in self._shapes:
            kind = shape[0]
            if kind == "polyline":
                _, p, color, width, opacity, dashed = shape
                coords = " ".join(f"{sx(q[0]):.2f},{sy(q[1]):.2f}" for q in p)
                dash = ' stroke-dasharray="6,4"' if dashed else ""
                out.write(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                          f'stroke-width="{width}" opacity="{opacity}"{dash}/>\n')
            elif kind == "polygon":
                _, p, color, opacity = shape
                coords = " ".join(f"{sx(q[0]):.2f},{sy(q[1]):.2f}" for q in p)
                out.write(f'<polygon points="{coords}" fill="{color}" opacity="{opacity}" '
                          f'stroke="none"/>\n')
            elif kind == "circle":
                _, c, radius, color, opacity = shape
                out.write(f'<circle cx="{sx(c[0]):.2f}" cy="{sy(c[1]):.2f}" '
                          f'r="{radius * scale:.2f}" fill="{color}" opacity="{opacity}"/>\n')
            elif kind == "rect":
                _, rlo, rhi, color, opacity = shape
                out.write(f'<rect x="{sx(rlo[0]):.2f}" y="{sy(rhi[1]):.2f}" '
                          f'width="{(rhi[0] - rlo[0]) * scale:.2f}" '
                          f'height="{(rhi[1] - rlo[1]) * scale:.2f}" '
                          f'fill="{color}" opacity="{opacity}"/>\n')
        out.write("</svg>\n")
        return out.getvalue()
