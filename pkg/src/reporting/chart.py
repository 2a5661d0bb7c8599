import logging
import math

from PIL import Image, ImageDraw, ImageFont

logger = logging.getLogger(__name__)

BACKGROUND = (255, 255, 255, 255)
AXIS = (60, 60, 60, 255)
GRID = (225, 225, 225, 255)
LINE = (60, 120, 200, 255)


def render_ratio_chart(rows, path, size=(800, 500), log_scale=None):
    """Line chart of the Replication/CodeNet expected-time ratio against lambda.

    Drawn at twice the target size and downsampled for smoother lines.
    """
    if not rows:
        raise ValueError("nothing to plot")
    scale = 2
    width, height = size[0] * scale, size[1] * scale
    margin = 70 * scale

    lams = [r.lam for r in rows]
    ratios = [r.ratio for r in rows]
    finite = [v for v in ratios if math.isfinite(v) and v > 0]
    if not finite:
        raise ValueError("no finite ratios to plot")
    if log_scale is None:
        log_scale = max(finite) / min(finite) > 100
    ys = [math.log10(v) if log_scale else v for v in finite]
    y_lo, y_hi = min(ys), max(ys)
    if y_hi - y_lo < 1e-12:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    x_lo, x_hi = min(lams), max(lams)
    if x_hi - x_lo < 1e-12:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5

    def to_px(lam, ratio):
        y = math.log10(ratio) if log_scale else ratio
        px = margin + (lam - x_lo) / (x_hi - x_lo) * (width - 2 * margin)
        py = height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)
        return px, py

    img = Image.new("RGBA", (width, height), BACKGROUND)
    draw = ImageDraw.Draw(img)
    font = ImageFont.load_default()

    for k in range(5):
        gy = margin + k * (height - 2 * margin) / 4
        draw.line((margin, gy, width - margin, gy), fill=GRID, width=scale)
        value = y_hi - k * (y_hi - y_lo) / 4
        label = f"1e{value:.1f}" if log_scale else f"{value:.3g}"
        draw.text((margin // 6, gy - 6 * scale), label, fill=AXIS, font=font)
    for k in range(5):
        gx = margin + k * (width - 2 * margin) / 4
        draw.text((gx - 8 * scale, height - margin + 8 * scale),
                  f"{x_lo + k * (x_hi - x_lo) / 4:.3g}", fill=AXIS, font=font)

    draw.line((margin, margin, margin, height - margin), fill=AXIS, width=2 * scale)
    draw.line((margin, height - margin, width - margin, height - margin), fill=AXIS, width=2 * scale)

    points = [to_px(r.lam, r.ratio) for r in rows if math.isfinite(r.ratio) and r.ratio > 0]
    if len(points) > 1:
        draw.line(points, fill=LINE, width=3 * scale, joint="curve")
    for px, py in points:
        draw.ellipse((px - 3 * scale, py - 3 * scale, px + 3 * scale, py + 3 * scale), fill=LINE)

    draw.text((width // 2 - 40 * scale, height - margin // 2), "lambda", fill=AXIS, font=font)
    draw.text((margin, margin // 3), "E[T] replication / E[T] codenet", fill=AXIS, font=font)

    img = img.resize(size, Image.Resampling.LANCZOS)
    try:
        img.save(path, format="PNG")
    except OSError as e:
        logger.error(f"Error saving chart: {e}")
        raise
    logger.info(f"Chart written to {path}")
    return img
