"""2D Helmholtz multi-domain FEM-BEM coupling workbench."""

__version__ = "0.1.0"
