"""Hand-crafted texture descriptors.

Default family sizes: fractal 24, wavelet 60, gabor 120, lbp 256, dft 64,
dct 64, laws 144, edge 16, glcm 16; 764 features in total.
"""
from .extract import (FAMILIES, ExtractConfig, FeatureTable, FeatureVector, extract_all,
                      feature_names, read_feature_table, write_feature_table)
from .fractal import box_count_dimension, fractal_features, multi_otsu
from .gabor import GaborConfig, gabor_bank, gabor_kernel
from .glcm import GlcmConfig, glcm_stats
from .laws import laws_maps
from .lbp import lbp_codes, lbp_histogram
from .spectral import dct_features, dft2, dft_features
from .edges import edge_histogram
from .stats import subband_stats
from .wavelet import WaveletConfig, wavelet_frames

__all__ = [
    "FAMILIES", "ExtractConfig", "FeatureTable", "FeatureVector", "extract_all",
    "feature_names", "read_feature_table", "write_feature_table",
    "box_count_dimension", "fractal_features", "multi_otsu",
    "GaborConfig", "gabor_bank", "gabor_kernel", "GlcmConfig", "glcm_stats",
    "laws_maps", "lbp_codes", "lbp_histogram", "dct_features", "dft2", "dft_features",
    "edge_histogram", "subband_stats", "WaveletConfig", "wavelet_frames",
]
