"""scenediff: text-and-scene conditioned point-cloud diffusion with explicit
guiding points, plus editing operations, point-set metrics, a synthetic scene
generator, and an executable verification suite for the underlying theory."""

from .autodiff import (Graph, GraphError, NonFiniteError, ParamStore, evaluate,
                       gradcheck, gradients, load_checkpoint, save_checkpoint,
                       value_and_gradients)
from .diffusion import (DiffusionError, NoiseSchedule, inpaint_loop,
                        make_schedule, p_sample_loop, q_sample)
from .gpnet import (GuidingPointsModel, GuidingPointsResult, HyperParams,
                    ModelError, compose_guiding_points)
from .metrics import (MetricReport, chamfer, emd, emd_auction, f1, guiding_mse,
                      ip_3d)
from .synthdata import (GenConfig, Interaction, Vocabulary, gen_interaction,
                        generate_dataset, load_dataset, save_dataset)
from .training import (TrainConfig, TrainLog, evaluate_model,
                       run_ablation_matrix, train)

__version__ = "0.1.0"
