"""k-mer featurization, feature selection and clustering of spike protein sequences."""
__version__ = "0.1.0"
