"""Benchmark toolkit for binary shape denoising.

Shapes are binary images. The toolkit aligns raw masks onto a canonical
canvas, corrupts them with seeded noise processes, denoises them with
baseline methods, and scores any method (in-repo or external predictions)
by mean IoU inside input-IoU bins, with one-sided paired t-tests marking
every method that is not significantly worse than the per-bin best.
"""
from .align import AlignmentParams, align, radial_percentile, rescale_bicubic
from .core import BinaryShape, Centroid, center_of_mass, iou, translate
from .denoise import (DenoiserConfig, EigenshapeModel, denoise_eigenshape,
                      denoise_median, denoise_morphological, load_model,
                      make_denoiser, reconstruct, save_model, train_eigenshape)
from .evaluate import (EvalBin, EvalRecord, SignificanceResult,
                       bin_by_input_iou, evaluate_method, mark_best,
                       paired_one_sided_t_test, student_t_cdf)
from .io import (ManifestRow, load_color_image, load_mask, read_manifest,
                 save_color_image, save_mask, write_manifest)
from .noise import (ClusterAssignment, ColorImage, NoiseSpec, ProbabilityMap,
                    apply_noise, boundary_pixels, circle_noise,
                    default_circle_count, occlusion_noise, probability_map,
                    real_image_noise, salt_pepper, sample_occlusion_rect,
                    stamp_disk, threshold_probability)
from .report import (ReportCell, ReportRow, ReportSection, ReportTable,
                     build_section, render_csv, render_json, render_text)
from .seeds import derive_seed, generator, splitmix64

__version__ = "0.1.0"
