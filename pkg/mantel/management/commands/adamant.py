from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from mantel.exceptions import AdamantError
from mantel.models import AnalysisRun
from mantel.runner import DESIGNS, RunConfig, run


def token_list(text):
    return tuple(token.strip() for token in text.split(",") if token.strip())


def float_list(text):
    try:
        return tuple(float(token) for token in token_list(text))
    except ValueError:
        raise CommandError(f"expected a comma-separated list of numbers, got {text!r}") from None


def pair_list(text):
    """``10:inf,100:inf`` -> (("10", "inf"), ("100", "inf"))."""
    pairs = []
    for item in token_list(text):
        parts = item.split(":")
        if len(parts) != 2:
            raise CommandError(f"kernel pair {item!r} must look like lambda_x:lambda_y")
        pairs.append((parts[0].strip(), parts[1].strip()))
    return tuple(pairs)


def thread_count(value):
    """ADAMANT_THREADS semantics: 0 means every core (joblib's -1)."""
    return -1 if value == 0 else value


class Command(BaseCommand):
    help = "Adaptive Mantel test: test, simulate, coherence, power"

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest="subcommand", required=True)

        test = subparsers.add_parser("test", help="AdaMant on two CSV matrices, JSON report")
        test.add_argument("--x", required=True, dest="x_path")
        test.add_argument("--y", required=True, dest="y_path")
        test.add_argument("--lambda-x", type=token_list, help="e.g. 100,1000,inf (0 = projection)")
        test.add_argument("--lambda-y", type=token_list)
        test.add_argument("--pairs", type=pair_list, default=(), help="explicit pairs, e.g. 10:inf,100:inf")
        test.add_argument("--heritability", type=float_list, default=(), help="h2 values added to the X grid")
        test.add_argument("--permutations", type=int)
        test.add_argument("--standardize-x", action="store_true")
        test.add_argument("--standardize-y", action="store_true")
        test.add_argument("--covariates", dest="covariates_path")
        test.add_argument("--literal-formula", action="store_true",
                          help="literal published min-p comparison (for comparison runs only)")
        test.add_argument("--out", required=True, dest="output_path")

        simulate = subparsers.add_parser("simulate", help="write a simulated dataset")
        self.add_design_arguments(simulate)
        simulate.add_argument("--sigma-a2", "--sigma-b2", "--beta", "--sigma-g2", "--w-scale", "--theta",
                              "--effect", type=float, dest="effect", help="effect size of the chosen design")
        simulate.add_argument("--out-x")
        simulate.add_argument("--out-y")
        simulate.add_argument("--epochs-dir", help="EEG designs: one epoch CSV per subject")

        coherence = subparsers.add_parser("coherence", help="band coherence features from epoch files")
        coherence.add_argument("--epochs-dir", required=True)
        coherence.add_argument("--band", action="append", default=[], dest="bands",
                               help="name:low:high or theta/alpha/beta/gamma; repeatable")
        coherence.add_argument("--sample-rate", type=float, default=256.0, dest="sample_rate_hz")
        coherence.add_argument("--out", required=True, dest="output_path",
                               help="CSV path; with several bands use {band} or get stem_band.csv")

        power = subparsers.add_parser("power", help="Monte-Carlo power table")
        self.add_design_arguments(power)
        power.add_argument("--effect-sizes", type=float_list, default=())
        power.add_argument("--lambda-x", type=token_list)
        power.add_argument("--lambda-y", type=token_list)
        power.add_argument("--permutations", type=int)
        power.add_argument("--replicates", type=int, default=200)
        power.add_argument("--alpha", type=float)
        power.add_argument("--out", required=True, dest="output_path")

        for subparser in (test, simulate, coherence, power):
            subparser.add_argument("--seed", type=int)
            subparser.add_argument("--threads", type=int, help="0 = all cores (default ADAMANT_THREADS)")
            subparser.add_argument("--save-run", action="store_true", help="store the run in the registry")

    @staticmethod
    def add_design_arguments(parser):
        parser.add_argument("--design", choices=DESIGNS, default="mvvc")
        parser.add_argument("--n", type=int)
        parser.add_argument("--p", type=int)
        parser.add_argument("--q", type=int)
        parser.add_argument("--sigma2", type=float, default=1.0)
        parser.add_argument("--rho", type=float, default=0.1, dest="design_rho")
        parser.add_argument("--trials", type=int, default=100)
        parser.add_argument("--series-length", type=int, default=1000)
        parser.add_argument("--sample-rate", type=float, default=256.0, dest="sample_rate_hz")

    def build_config(self, options):
        command = options["subcommand"]
        threads = options["threads"] if options["threads"] is not None else settings.ADAMANT_THREADS
        fields = {
            "command": command,
            "seed": options["seed"] if options["seed"] is not None else settings.ADAMANT_SEED,
            "n_jobs": thread_count(threads),
            "rank_tolerance": settings.ADAMANT_RANK_TOLERANCE,
        }
        passthrough = (
            "x_path", "y_path", "lambda_x", "lambda_y", "pairs", "standardize_x", "standardize_y",
            "covariates_path", "literal_formula", "output_path", "design", "n", "p", "q", "sigma2",
            "design_rho", "trials", "series_length", "sample_rate_hz", "epochs_dir", "out_x", "out_y",
            "replicates", "bands", "effect_sizes",
        )
        fields.update({key: options[key] for key in passthrough if options.get(key) is not None})
        if options.get("heritability"):
            fields["heritability_grid"] = options["heritability"]
        if options.get("effect") is not None:
            fields["effect_sizes"] = (options["effect"],)
        if command in ("test", "power"):
            permutations = options.get("permutations")
            fields["permutations"] = permutations if permutations is not None else settings.ADAMANT_PERMUTATIONS
        if command == "power":
            alpha = options.get("alpha")
            fields["alpha"] = alpha if alpha is not None else settings.ADAMANT_ALPHA
        return RunConfig(**fields)

    def handle(self, *args, **options):
        try:
            config = self.build_config(options)
            result = run(config)
        except AdamantError as exc:
            raise CommandError(str(exc)) from exc

        if config.command == "test":
            self.stdout.write(
                f"adaptive p = {result.adaptive_p:.6g} over {len(result.pairs)} kernel pairs "
                f"(selected {result.selected.label})"
            )
            report, adaptive_p, runtime_ms, output = result.to_dict(), result.adaptive_p, result.runtime_ms, config.output_path
        elif config.command == "power":
            report = {"config": config.echo(), "table": result.to_dict(orient="records")}
            adaptive_p, runtime_ms, output = None, None, config.output_path
        else:
            outputs = [str(path) for path in result]
            report = {"config": config.echo(), "outputs": outputs}
            adaptive_p, runtime_ms, output = None, None, outputs[0]

        if options["save_run"]:
            run_record = AnalysisRun.objects.create(
                command=config.command,
                seed=config.seed,
                permutations=config.permutations,
                n_jobs=config.n_jobs,
                adaptive_p=adaptive_p,
                runtime_ms=runtime_ms,
                config=config.echo(),
                report=report,
                output_path=str(output),
            )
            self.stdout.write(f"saved run #{run_record.pk}")
        self.stdout.write(self.style.SUCCESS(f"{config.command}: wrote {output}"))
