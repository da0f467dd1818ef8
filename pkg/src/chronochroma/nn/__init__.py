from . import kernels, layers, optim

__all__ = ["kernels", "layers", "optim"]
