"""Published benchmark MSEs (five models x four tasks per block) and the
reported relative gain of the winner over the runner-up, in percent."""

MODELS = ("ResMLP", "SIREN", "FFN+P", "FFN+G", "MMGN")

# block -> model -> MSE for tasks 1..4
BLOCKS = {
    "sim s=5%": {
        "ResMLP": (1.951e-2, 1.672e-2, 1.901e-2, 1.468e-2),
        "SIREN": (2.483e-2, 2.457e-2, 2.730e-1, 2.455e-2),
        "FFN+P": (2.974e-2, 1.121e-2, 1.495e-2, 8.927e-3),
        "FFN+G": (2.943e-2, 1.948e-2, 1.980e-2, 1.426e-2),
        "MMGN": (4.244e-3, 4.731e-3, 3.148e-3, 3.927e-3),
    },
    "sat s=0.1%": {
        "ResMLP": (1.717e-3, 1.601e-3, 1.179e-3, 1.282e-3),
        "SIREN": (3.129e-1, 4.398e-2, 1.304e-2, 9.338e-2),
        "FFN+P": (2.917e-3, 2.392e-3, 7.912e-4, 7.565e-4),
        "FFN+G": (4.904e-3, 7.969e-3, 1.005e-3, 1.044e-3),
        "MMGN": (1.073e-3, 1.131e-3, 6.309e-4, 6.298e-4),
    },
    "sim s=25%": {
        "ResMLP": (1.593e-2, 1.252e-2, 1.322e-2, 1.378e-2),
        "SIREN": (2.643e-2, 2.669e-2, 2.730e-1, 2.679e-2),
        "FFN+P": (8.374e-3, 7.905e-3, 7.720e-3, 6.514e-3),
        "FFN+G": (1.307e-2, 1.360e-2, 1.331e-2, 1.300e-2),
        "MMGN": (2.955e-3, 2.991e-3, 2.780e-3, 2.802e-3),
    },
    "sat s=0.3%": {
        "ResMLP": (9.601e-4, 7.808e-4, 8.264e-4, 8.144e-4),
        "SIREN": (7.630e-3, 6.421e-3, 6.297e-3, 9.925e-3),
        "FFN+P": (8.429e-4, 8.294e-4, 4.823e-4, 5.580e-4),
        "FFN+G": (9.169e-4, 1.157e-3, 8.128e-4, 6.253e-4),
        "MMGN": (6.116e-4, 5.912e-4, 4.582e-4, 4.896e-4),
    },
    "sim s=50%": {
        "ResMLP": (1.004e-2, 8.461e-3, 9.716e-3, 1.138e-2),
        "SIREN": (2.728e-1, 2.728e-1, 1.408e-2, 1.382e-2),
        "FFN+P": (5.383e-3, 6.192e-3, 5.782e-3, 5.503e-3),
        "FFN+G": (1.182e-2, 1.148e-2, 1.201e-2, 1.124e-2),
        "MMGN": (2.802e-3, 2.824e-3, 2.730e-3, 2.760e-3),
    },
    "sat s=0.5%": {
        "ResMLP": (6.741e-4, 7.752e-4, 5.790e-4, 8.317e-4),
        "SIREN": (2.214e-3, 9.131e-4, 5.973e-4, 8.019e-1),
        "FFN+P": (5.413e-4, 5.807e-4, 4.226e-4, 5.004e-4),
        "FFN+G": (7.067e-4, 8.256e-4, 6.783e-4, 5.721e-4),
        "MMGN": (5.081e-4, 4.760e-4, 4.127e-4, 4.124e-4),
    },
}

PROMOTION = {
    "sim s=5%": (78.24, 57.79, 78.94, 56.01),
    "sat s=0.1%": (37.51, 29.35, 20.26, 16.74),
    "sim s=25%": (64.71, 62.16, 63.98, 56.98),
    "sat s=0.3%": (27.44, 24.28, 4.99, 12.25),
    "sim s=50%": (47.94, 54.39, 52.78, 49.84),
    "sat s=0.5%": (6.13, 18.02, 2.34, 17.58),
}


def task_errors(block: str, task: int) -> dict[str, float]:
    return {m: BLOCKS[block][m][task - 1] for m in MODELS}
