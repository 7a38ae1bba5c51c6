"""
Command-line interface: train, attack, defend, report and sweep subcommands
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from dotenv import dotenv_values

from config.constants import (
    ATTACK_DEFAULT_EPSILON,
    BIM_DEFAULT_ITERATIONS,
    PGD_DEFAULT_ITERATIONS,
    DEFAULT_ALPHA,
    DEFAULT_BATCH_SIZE,
    DEFAULT_CR,
    DEFAULT_D_VALUES,
    DEFAULT_EPOCHS,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_ITER,
    DEFAULT_N_ADVERSARIAL,
    DEFAULT_POP_SIZE,
    DEFAULT_RUNS,
    DEFAULT_TEST_SUBSET,
    DEFAULT_TRAIN_SUBSET,
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_USAGE,
    AttackKind,
    DatasetSource,
    DatasetSplit,
    ReportFormat,
)
from config.settings import Settings
from core.attack_sweep import epsilon_sweep, tune_pgd_schedule
from core.attacks import build_adversarial_set
from core.experiment import run_experiment
from core.network import Network
from core.trainer import Trainer
from data.adversarial_store import load_adversarial_set, load_config, save_adversarial_set
from data.dataset_loader import load_cifar10, load_idx, stratified_sample
from data.model_store import load_model, save_model
from data.models import AttackSpec, Dataset, ExperimentSpec, SearchConfig
from data.report_store import emit_report, load_report
from rendering.image_utils import format_file_size
from ui.display import Display
from utils.exceptions import (
    AttackExhaustedError,
    InvalidConfigError,
    PixelDefenseError,
    TrainingDivergedError,
)
from utils.helpers import ensure_dir
from utils.timer import Stopwatch
from utils.validators import InputValidator

logger = logging.getLogger(__name__)

RUNTIME_ERRORS = (AttackExhaustedError, TrainingDivergedError)
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _arg_type(parse: Callable) -> Callable:
    """Wrap a validator so argparse reports its error as a usage error"""
    def convert(value):
        try:
            return parse(value)
        except InvalidConfigError as e:
            raise argparse.ArgumentTypeError(str(e))
    convert.__name__ = getattr(parse, '__name__', 'value')
    return convert


def _int(minimum: Optional[int] = None, name: str = "value") -> Callable:
    return _arg_type(lambda value: InputValidator.validate_int(value, name, minimum))


def _float(low: Optional[float] = None, high: Optional[float] = None, name: str = "value") -> Callable:
    return _arg_type(lambda value: InputValidator.validate_float(value, name, low, high))


_INT_LIST = _arg_type(lambda value: InputValidator.validate_int_list(value, "list"))
_FLOAT_LIST = _arg_type(lambda value: InputValidator.validate_float_list(value, "list"))
_ATTACK = _arg_type(InputValidator.validate_attack_kind)
_DATASET = _arg_type(InputValidator.validate_dataset)
_FORMAT = _arg_type(InputValidator.validate_report_format)


def read_config_file(path: str) -> Dict[str, str]:
    """
    Read a flat key=value config file

    Keys are long flag names; '-' and '_' are interchangeable.

    Raises:
        InvalidConfigError: If the file is missing
    """
    if not Path(path).is_file():
        raise InvalidConfigError(f"Config file not found: {path}")
    values = dotenv_values(path)
    return {key.strip().replace('-', '_'): value for key, value in values.items() if value is not None}


class PixelDefenseCLI:
    """
    Subcommand dispatcher

    Exit codes: 0 success, 2 usage/config/input error, 3 runtime failure
    (attack exhaustion, training divergence).
    """

    def __init__(self):
        self.display = Display()
        self.show_progress = False

    # ===== Parser =====

    def _common(self) -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument('--config', help='key=value file; flags take precedence')
        common.add_argument('--seed', type=_int(name='seed'), default=Settings.DEFAULT_SEED)
        common.add_argument('--threads', type=_int(1, 'threads'), default=Settings.THREADS,
                            help='worker cap (default: available cores)')
        common.add_argument('--quiet', action='store_true', help='no progress bars or summaries')
        common.add_argument('--no-color', action='store_true')
        common.add_argument('--log-level', default=Settings.LOG_LEVEL,
                            choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
        return common

    def _data_args(self, parser: argparse.ArgumentParser):
        parser.add_argument('--dataset', type=_DATASET, default=DatasetSource.MNIST)
        parser.add_argument('--data-dir', help='directory with the standard corpus file names')
        parser.add_argument('--train-images', help='MNIST train image file (overrides --data-dir)')
        parser.add_argument('--train-labels')
        parser.add_argument('--test-images')
        parser.add_argument('--test-labels')

    def build_parser(self) -> Tuple[argparse.ArgumentParser, List[argparse.ArgumentParser]]:
        common = self._common()
        parser = argparse.ArgumentParser(
            prog='pixel-defense',
            description='Sensitive-pixel filtering defense against adversarial images',
        )
        commands = parser.add_subparsers(dest='command', required=True)

        train = commands.add_parser('train', parents=[common], help='train LeNet-lite')
        self._data_args(train)
        train.add_argument('--model-out', required=True)
        train.add_argument('--epochs', type=_int(0, 'epochs'), default=DEFAULT_EPOCHS)
        train.add_argument('--lr', type=_float(0, None, 'lr'), default=DEFAULT_LEARNING_RATE)
        train.add_argument('--batch-size', type=_int(1, 'batch size'), default=DEFAULT_BATCH_SIZE)
        train.add_argument('--train-subset', type=_int(1, 'train subset'), default=DEFAULT_TRAIN_SUBSET)
        train.add_argument('--test-subset', type=_int(1, 'test subset'), default=DEFAULT_TEST_SUBSET)
        train.set_defaults(handler=self.cmd_train)

        attack = commands.add_parser('attack', parents=[common], help='build an adversarial set')
        self._data_args(attack)
        attack.add_argument('--model', required=True)
        attack.add_argument('--kind', type=_ATTACK, required=True)
        attack.add_argument('--epsilon', type=_float(name='epsilon'))
        attack.add_argument('--iterations', type=_int(1, 'iterations'))
        attack.add_argument('--step-size', type=_float(name='step size'))
        attack.add_argument('--no-random-start', dest='random_start', action='store_false',
                            default=None, help='PGD: start from the clean image')
        attack.add_argument('--n', type=_int(1, 'n'), default=DEFAULT_N_ADVERSARIAL)
        attack.add_argument('--out-dir', required=True)
        attack.set_defaults(handler=self.cmd_attack)

        defend = commands.add_parser('defend', parents=[common], help='run the d sweep')
        defend.add_argument('--model', required=True)
        defend.add_argument('--adversarial-dir', required=True)
        defend.add_argument('--d', dest='d_values', type=_INT_LIST,
                            default=list(DEFAULT_D_VALUES), help='comma list, e.g. 1,10,50,100')
        defend.add_argument('--pop', type=_int(1, 'pop'), default=DEFAULT_POP_SIZE)
        defend.add_argument('--alpha', type=_float(0, None, 'alpha'), default=DEFAULT_ALPHA)
        defend.add_argument('--cr', type=_float(0, 1, 'cr'), default=DEFAULT_CR)
        defend.add_argument('--max-iter', type=_int(0, 'max iter'), default=DEFAULT_MAX_ITER)
        defend.add_argument('--runs', type=_int(1, 'runs'), default=DEFAULT_RUNS)
        defend.add_argument('--seeds', type=_INT_LIST, help='one per run (default 0..runs-1)')
        defend.add_argument('--n', type=_int(1, 'n'), help='examples used (default: whole set)')
        defend.add_argument('--report-out', required=True)
        defend.add_argument('--format', type=_FORMAT, default=ReportFormat.JSON)
        defend.add_argument('--no-clean', action='store_true', help='skip clean-accuracy check')
        defend.add_argument('--skip-unflipped', action='store_true',
                            help='leave images unfiltered when the search finds no flip')
        defend.add_argument('--dump-dir', help='write PNG triptychs of the first images per d')
        defend.set_defaults(handler=self.cmd_defend)

        report = commands.add_parser('report', parents=[common], help='re-render a JSON report')
        report.add_argument('--input', required=True)
        report.add_argument('--output', required=True)
        report.add_argument('--format', type=_FORMAT, default=ReportFormat.CSV)
        report.set_defaults(handler=self.cmd_report)

        sweep = commands.add_parser('sweep', parents=[common], help='fooling rate per epsilon')
        self._data_args(sweep)
        sweep.add_argument('--model', required=True)
        sweep.add_argument('--kind', type=_ATTACK, required=True)
        sweep.add_argument('--epsilons', type=_FLOAT_LIST, default=[0.01, 0.1, 0.55])
        sweep.add_argument('--iterations', type=_int(1, 'iterations'))
        sweep.add_argument('--n', type=_int(1, 'n'), default=DEFAULT_N_ADVERSARIAL)
        sweep.add_argument('--tune', action='store_true', help='PGD: incremental schedule search')
        sweep.add_argument('--target-rate', type=_float(0, 1, 'target rate'), default=0.99)
        sweep.add_argument('--max-iters', type=_int(1, 'max iters'), default=200)
        sweep.add_argument('--out', help='write the sweep as JSON')
        sweep.set_defaults(handler=self.cmd_sweep)

        return parser, [train, attack, defend, report, sweep]

    @staticmethod
    def apply_config_file(subparsers: List[argparse.ArgumentParser], values: Dict[str, str]):
        """
        Install config-file values as parser defaults

        A key may be a long flag name (no_random_start) or its destination
        (random_start). A value supplied here satisfies a required flag.

        Raises:
            InvalidConfigError: On a key no subcommand accepts
        """
        known = {'config'}
        for sub in subparsers:
            for action in sub._actions:
                names = {action.dest} | {
                    option.lstrip('-').replace('-', '_') for option in action.option_strings
                }
                for key in sorted(names & set(values) - {'config', 'help'}):
                    known.add(key)
                    raw = values[key]
                    if isinstance(action, argparse._StoreTrueAction):
                        action.default = InputValidator.validate_bool(raw, key)
                    elif isinstance(action, argparse._StoreFalseAction):
                        flag = InputValidator.validate_bool(raw, key)
                        action.default = flag if key == action.dest else not flag
                    else:
                        action.default = raw
                    action.required = False
        unknown = sorted(set(values) - known)
        if unknown:
            raise InvalidConfigError(f"Unknown config key(s): {', '.join(unknown)}")

    def parse(self, argv: Optional[List[str]]) -> argparse.Namespace:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument('--config')
        known, _ = pre.parse_known_args(argv)

        parser, subparsers = self.build_parser()
        if known.config:
            self.apply_config_file(subparsers, read_config_file(known.config))
        return parser.parse_args(argv)

    # ===== Entry =====

    def run(self, argv: Optional[List[str]] = None) -> int:
        """
        Parse arguments and dispatch

        Returns:
            Process exit code
        """
        try:
            args = self.parse(argv)
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_USAGE
        except PixelDefenseError as e:
            self.display.show_error(str(e))
            return EXIT_USAGE

        level = getattr(logging, str(args.log_level).upper(), logging.INFO)
        logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
        self.display = Display(use_colors=not args.no_color and sys.stdout.isatty(), quiet=args.quiet)
        self.show_progress = not args.quiet and sys.stderr.isatty()

        try:
            args.handler(args)
        except RUNTIME_ERRORS as e:
            self.display.show_error(str(e))
            return EXIT_RUNTIME
        except PixelDefenseError as e:
            self.display.show_error(str(e))
            return EXIT_USAGE
        except KeyboardInterrupt:
            self.display.show_error("Interrupted")
            return EXIT_RUNTIME
        return EXIT_OK

    # ===== Helpers =====

    @staticmethod
    def load_splits(args: argparse.Namespace) -> Tuple[Dataset, Dataset]:
        """Train and test splits named by --dataset / --data-dir / file flags"""
        if args.dataset == DatasetSource.CIFAR10:
            directory = Path(args.data_dir) if args.data_dir else Settings.CIFAR_DIR
            train = load_cifar10([directory / name for name in Settings.CIFAR_TRAIN_BATCHES],
                                 DatasetSplit.TRAIN)
            test = load_cifar10([directory / Settings.CIFAR_TEST_BATCH], DatasetSplit.TEST)
            return train, test

        directory = Path(args.data_dir) if args.data_dir else Settings.MNIST_DIR
        train = load_idx(args.train_images or directory / Settings.MNIST_TRAIN_IMAGES,
                         args.train_labels or directory / Settings.MNIST_TRAIN_LABELS,
                         DatasetSplit.TRAIN)
        test = load_idx(args.test_images or directory / Settings.MNIST_TEST_IMAGES,
                        args.test_labels or directory / Settings.MNIST_TEST_LABELS,
                        DatasetSplit.TEST)
        return train, test

    # ===== Subcommands =====

    def cmd_train(self, args: argparse.Namespace):
        train, test = self.load_splits(args)
        train = stratified_sample(train, min(args.train_subset, len(train)), args.seed)
        test = stratified_sample(test, min(args.test_subset, len(test)), args.seed + 1)

        config = {
            'dataset': args.dataset.value,
            'epochs': args.epochs,
            'lr': args.lr,
            'batch_size': args.batch_size,
            'seed': args.seed,
            'train_subset': len(train),
            'test_subset': len(test),
            'architecture': 'lenet-lite',
        }
        self.display.show_header("TRAIN")
        self.display.show_config(config)

        net = Network.lenet_lite(train.image_shape, seed=args.seed)
        self.display.show_info(f"Parameters: {net.parameter_count():,}")
        trainer = Trainer(args.epochs, args.lr, args.batch_size, args.seed, self.show_progress)
        with Stopwatch() as watch:
            model = trainer.train(net, train.pixels, train.labels)

        train_accuracy = model.accuracy(train.pixels, train.labels)
        test_accuracy = model.accuracy(test.pixels, test.labels)
        meta = dict(config, train_accuracy=train_accuracy, test_accuracy=test_accuracy,
                    loss_history=trainer.history)
        path = save_model(model, args.model_out, meta)

        self.display.show_training_result(train_accuracy, test_accuracy, str(path), watch.elapsed)
        self.display.show_info(f"Model size: {format_file_size(path.stat().st_size)}")

    def cmd_attack(self, args: argparse.Namespace):
        net, _ = load_model(args.model)
        train, test = self.load_splits(args)
        iterations = args.iterations
        if iterations is None:
            iterations = PGD_DEFAULT_ITERATIONS if args.kind == AttackKind.PGD else BIM_DEFAULT_ITERATIONS
        spec = AttackSpec(
            kind=args.kind,
            epsilon=args.epsilon if args.epsilon is not None else ATTACK_DEFAULT_EPSILON[args.kind],
            iterations=iterations,
            step_size=args.step_size,
            random_start=args.random_start,
            seed=args.seed,
        )
        self.display.show_header(f"ATTACK ({spec.kind.value})")
        self.display.show_config(spec.to_dict())

        examples = build_adversarial_set(net, train, spec, args.n, args.seed, holdout=test,
                                         threads=args.threads, show_progress=self.show_progress)
        extra = {'dataset': args.dataset.value, 'model': Path(args.model).name,
                 'seed': args.seed, 'n': args.n}
        out_dir = save_adversarial_set(examples, args.out_dir, spec, extra)

        self.display.show_attack_result(
            spec.kind.value, len(examples),
            float(np.mean([e.l2 for e in examples])),
            float(max(e.linf for e in examples)),
            str(out_dir),
        )

    def cmd_defend(self, args: argparse.Namespace):
        net, _ = load_model(args.model)
        set_config = load_config(args.adversarial_dir)
        examples, attack = load_adversarial_set(args.adversarial_dir)
        if args.n and args.n > len(examples):
            self.display.show_warning(
                f"--n {args.n} exceeds the {len(examples)} examples in {args.adversarial_dir}"
            )

        spec = ExperimentSpec(
            dataset=set_config.get('dataset', DatasetSource.MNIST.value),
            attack=attack,
            model_path=args.model,
            adversarial_dir=args.adversarial_dir,
            d_values=args.d_values,
            n_adversarial=args.n or len(examples),
            runs=args.runs,
            seeds=args.seeds,
            search=SearchConfig(pop_size=args.pop, alpha=args.alpha, cr=args.cr,
                                max_iter=args.max_iter),
            measure_clean=not args.no_clean,
            filter_unflipped=not args.skip_unflipped,
            threads=args.threads,
        )
        self.display.show_header("DEFEND")
        self.display.show_config(spec.to_dict())

        dump_dir = ensure_dir(args.dump_dir) if args.dump_dir else None
        report = run_experiment(spec, net=net, examples=examples, show_progress=self.show_progress,
                                dump_dir=dump_dir, dump_limit=Settings.DUMP_LIMIT)
        path = emit_report(report, args.report_out, args.format)

        self.display.show_report(report)
        if dump_dir:
            self.display.show_dump_location(str(dump_dir))
        self.display.show_success(f"Report written to {path}")

    def cmd_report(self, args: argparse.Namespace):
        report = load_report(args.input)
        path = emit_report(report, args.output, args.format)
        self.display.show_report(report)
        self.display.show_success(f"Report written to {path}")

    def cmd_sweep(self, args: argparse.Namespace):
        net, _ = load_model(args.model)
        train, _ = self.load_splits(args)
        output: dict = {'kind': args.kind.value, 'n': args.n, 'seed': args.seed}

        if args.tune:
            if args.kind != AttackKind.PGD:
                raise InvalidConfigError("--tune applies to --kind pgd only")
            schedule, points = tune_pgd_schedule(
                net, train, args.target_rate, args.n, args.seed,
                max_iters=args.max_iters, threads=args.threads,
            )
            output['schedule'] = schedule.to_dict()
            self.display.show_info(
                f"Chosen PGD schedule: eps={schedule.epsilon:g}, iterations={schedule.iterations}"
            )
        else:
            points = epsilon_sweep(net, train, args.kind, args.epsilons, args.n, args.seed,
                                   iterations=args.iterations, threads=args.threads)

        output['points'] = [point.to_dict() for point in points]
        self.display.show_sweep(args.kind.value, points)
        if args.out:
            out = Path(args.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(json.dumps(output, indent=2) + "\n")
            self.display.show_success(f"Sweep written to {out}")
