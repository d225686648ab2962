"""Wind power curve modeling from SCADA scatter images.

Synthesizes labeled scatter around S-shape ground truths, rasterizes the
scatter and the clean curve into paired images, trains a convolutional
generator to denoise scatter images into clean curve images, and extracts
a constrained piecewise-polynomial power curve from the generated image.
Classic parametric / shallow-network / spline benchmarks and an evaluation
harness round out the toolkit.
"""

__version__ = "0.1.0"
