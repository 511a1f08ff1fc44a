"""STDP feature learning on whitened images.

Modules: ``numerics`` (covariance, Jacobi eigensolver, correlation),
``datasets`` (CIFAR-10/STL-10 loaders, patches, PNG grids), ``whitening``
(ZCA, whitening kernels, DoG), ``spike_coding`` (latency code), ``snn``
(IF neurons, STDP, WTA homeostasis), ``classify`` (pooling, linear SVM),
``pipeline``/``cli`` (orchestration).
"""

__version__ = "0.1.0"
