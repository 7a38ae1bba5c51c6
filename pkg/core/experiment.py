"""
Defense evaluation: success rates per d with seeded repeated runs
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from core.filter_defense import defend
from core.network import Network
from data.adversarial_store import load_adversarial_set
from data.model_store import load_model
from data.models import (
    AdversarialExample,
    DefenseCell,
    DefenseReport,
    ExperimentSpec,
    SearchConfig,
)
from rendering.image_utils import save_triptych
from utils.exceptions import AdversarialSetError, InvalidConfigError
from utils.helpers import utc_timestamp
from utils.timer import LapStats, Stopwatch

logger = logging.getLogger(__name__)


def image_seed(run_seed: int, position: int) -> int:
    """Search seed for one image of one run"""
    return int(np.random.SeedSequence([run_seed, position]).generate_state(1)[0])


@dataclass
class DefenseRun:
    """Outcome of defending every image of a set once"""
    correct: int
    total: int
    flipped: int
    evaluations: int
    seconds_per_image: float
    defended: List[np.ndarray]

    @property
    def rate(self) -> float:
        return self.correct / self.total if self.total else 0.0


def defend_images(
    net: Network,
    images: Sequence[np.ndarray],
    labels: Sequence[int],
    cfg: SearchConfig,
    filter_unflipped: bool = True,
    threads: int = 1,
    show_progress: bool = False,
    desc: str = "defend",
) -> DefenseRun:
    """
    Defend each image with a per-image search seed derived from cfg.seed

    Images are processed concurrently when threads > 1; results do not
    depend on the thread count.
    """
    laps = LapStats()

    def one(position: int):
        with Stopwatch() as watch:
            defended, predicted, outcome = defend(
                net, images[position], cfg.replace(seed=image_seed(cfg.seed, position)),
                filter_unflipped=filter_unflipped,
            )
        return defended, predicted, outcome, watch.elapsed

    results = []
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor, \
            tqdm(total=len(images), unit=' img', desc=desc, disable=not show_progress, leave=False) as pbar:
        for result in executor.map(one, range(len(images))):
            results.append(result)
            laps.add(result[3])
            pbar.update(1)

    return DefenseRun(
        correct=sum(int(r[1] == label) for r, label in zip(results, labels)),
        total=len(images),
        flipped=sum(int(r[2].flipped) for r in results),
        evaluations=sum(r[2].evaluations for r in results),
        seconds_per_image=laps.mean,
        defended=[r[0] for r in results],
    )


def defense_success_rate(net: Network, examples: Sequence[AdversarialExample], cfg: SearchConfig,
                         filter_unflipped: bool = True, threads: int = 1) -> float:
    """
    Fraction of adversarial examples whose defended prediction is the true label

    Raises:
        AdversarialSetError: If examples is empty
    """
    if not examples:
        raise AdversarialSetError("Adversarial set is empty")
    run = defend_images(
        net,
        [e.perturbed for e in examples],
        [e.true_label for e in examples],
        cfg,
        filter_unflipped=filter_unflipped,
        threads=threads,
    )
    return run.rate


class ExperimentRunner:
    """
    Runs the d sweep of an ExperimentSpec against one adversarial set

    Every (d, run) cell uses the same per-image search budget; only d and
    the run seed change.
    """

    def __init__(
        self,
        net: Network,
        examples: Sequence[AdversarialExample],
        model_name: str = "",
        show_progress: bool = False,
        dump_dir: Optional[str] = None,
        dump_limit: int = 0,
    ):
        """
        Args:
            net: Defended classifier
            examples: Adversarial set
            model_name: Echoed into the report
            show_progress: Show tqdm bars per cell
            dump_dir: Write original/adversarial/defended PNGs here
            dump_limit: Images dumped per d value
        """
        if not examples:
            raise AdversarialSetError("Adversarial set is empty")
        self.net = net
        self.examples = list(examples)
        self.model_name = model_name
        self.show_progress = show_progress
        self.dump_dir = Path(dump_dir) if dump_dir else None
        self.dump_limit = dump_limit

    def _dump(self, d: int, examples: List[AdversarialExample], defended: List[np.ndarray]):
        for position, (example, image) in enumerate(zip(examples[:self.dump_limit], defended)):
            save_triptych(example.original.pixels, example.perturbed, image,
                          self.dump_dir / f"d{d:03d}" / f"{position:03d}.png")

    def run(self, spec: ExperimentSpec) -> DefenseReport:
        """
        Evaluate every d value with every run seed

        Returns:
            DefenseReport with one cell per d
        """
        watch = Stopwatch().start()
        examples = self.examples[:spec.n_adversarial]
        if len(examples) < spec.n_adversarial:
            logger.warning("adversarial set has %d examples, %d requested",
                           len(examples), spec.n_adversarial)
        adversarial = [e.perturbed for e in examples]
        originals = [e.original.pixels for e in examples]
        labels = [e.true_label for e in examples]

        undefended = self.net.accuracy(np.stack(adversarial), np.array(labels))
        cells = []
        for d in spec.d_values:
            rates, flipped, evaluations, seconds = [], 0, 0, []
            for run_index, seed in enumerate(spec.seeds):
                cfg = spec.search.replace(d=d, seed=seed)
                run = defend_images(
                    self.net, adversarial, labels, cfg,
                    filter_unflipped=spec.filter_unflipped,
                    threads=spec.threads,
                    show_progress=self.show_progress,
                    desc=f"d={d} run {run_index + 1}/{spec.runs}",
                )
                rates.append(run.rate)
                flipped += run.flipped
                evaluations += run.evaluations
                seconds.append(run.seconds_per_image)
                if run_index == 0 and self.dump_dir is not None and self.dump_limit:
                    self._dump(d, examples, run.defended)
                logger.info("d=%d seed=%d: success rate %.4f", d, seed, run.rate)

            clean = None
            if spec.measure_clean:
                clean = defend_images(
                    self.net, originals, labels, spec.search.replace(d=d, seed=spec.seeds[0]),
                    filter_unflipped=spec.filter_unflipped,
                    threads=spec.threads,
                    show_progress=self.show_progress,
                    desc=f"d={d} clean",
                ).rate

            attempts = len(examples) * spec.runs
            cells.append(DefenseCell(
                d=d,
                runs=rates,
                mean=float(np.mean(rates)),
                seeds=list(spec.seeds),
                clean_accuracy=clean,
                flip_rate=flipped / attempts,
                mean_evaluations=evaluations / attempts,
                seconds_per_image=float(np.mean(seconds)),
            ))

        config = spec.to_dict()
        config['n_adversarial'] = len(examples)
        return DefenseReport(
            dataset=spec.dataset.value,
            model=self.model_name or Path(spec.model_path).name,
            attack=spec.attack.to_dict(),
            cells=cells,
            n_adversarial=len(examples),
            undefended_accuracy=undefended,
            config=config,
            generated_at=utc_timestamp(),
            wall_time=watch.stop(),
        )


def run_experiment(
    spec: ExperimentSpec,
    net: Optional[Network] = None,
    examples: Optional[Sequence[AdversarialExample]] = None,
    show_progress: bool = False,
    dump_dir: Optional[str] = None,
    dump_limit: int = 0,
) -> DefenseReport:
    """
    Load what spec names (unless given) and run the sweep

    Raises:
        ModelNotFoundError / ModelFormatError: Bad model file
        AdversarialSetError: Bad adversarial set
        InvalidConfigError: No adversarial set given
    """
    if net is None:
        net, _ = load_model(spec.model_path)
    if examples is None:
        if not spec.adversarial_dir:
            raise InvalidConfigError("An adversarial set directory is required")
        examples, _ = load_adversarial_set(spec.adversarial_dir)
    runner = ExperimentRunner(net, examples, show_progress=show_progress,
                              dump_dir=dump_dir, dump_limit=dump_limit)
    return runner.run(spec)
