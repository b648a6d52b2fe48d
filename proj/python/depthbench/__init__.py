"""Depth-estimation benchmarking: metrics, losses, scoring and a reference micro-net."""

from ._core import (
    DEPTH_FLOOR,
    FITTED_NORMALIZATION,
    DepthbenchError,
    ReferenceNet,
    affinity_map,
    check_gradients,
    combined_smart_loss,
    evaluate_image,
    final_score,
    fit_normalization_constant,
    gradient_matching_loss,
    l1_gradient_loss,
    l1_point_loss,
    load_depth_png,
    log10_error,
    mse_distill_loss,
    pairwise_distillation_loss,
    published_challenge_results,
    rel_error,
    render_leaderboard,
    rmse,
    rmse_loss,
    save_depth_png,
    scale_invariant_loss,
    si_rmse,
    ssim_loss,
)

__version__ = "0.1.0"
