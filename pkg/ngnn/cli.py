import os
import sys
import functools

import click
import questionary
from rich.table import Table
from rich.console import Console

import ngnn
from ngnn.graph import SbmSpec, generate_sbm, make_link_split, save_link_dataset, save_node_dataset
from ngnn.model import ARCHS, POSITIONS, ModelConfig, build_model, model_param_count
from ngnn.utils import ConfigError, NgnnError, SpecParseError, ensure_dir, load_config, print_in_box, write_config
from ngnn.utils.log import setup_logging
from ngnn.workflow import (
    TASKS,
    ExperimentConfig,
    ResultTable,
    depth_sweep,
    edge_noise_sweep,
    noise_sweep,
    position_sweep,
    scaffold_experiment,
    train as train_workflow,
)

console = Console()
err_console = Console(stderr=True)
CONFIG_FILE = 'experiment.yml'


def handle_errors(func):
    """
    handle_errors: map toolkit errors to exit codes, 2 for configuration and spec errors, 1 otherwise.
    """

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ConfigError, SpecParseError) as e:
            print_in_box(str(e), err_console, title="Configuration error", color="red")
            sys.exit(2)
        except (NgnnError, OSError) as e:
            print_in_box(str(e), err_console, title="Error", color="red")
            sys.exit(1)

    return wrapper


def experiment_options(func):
    """The flags shared by the experiment commands."""
    options = [
        click.option('--config', 'config_path', required=True, help='The experiment configuration (YAML or JSON).'),
        click.option('--out', default='out', show_default=True, help='The output directory.'),
        click.option('--seed', type=int, default=None, help='Override the first run seed.'),
        click.option('--runs', type=int, default=None, help='Override the number of seeded runs.'),
        click.option('--threads', type=int, default=None, help='Override the number of worker threads.'),
        click.option('--no-cache', is_flag=True, help='Retrain runs that already have a stored result.'),
        click.option('--verbose', is_flag=True, help='Log at debug level.'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def load_experiment_config(config_path, seed, runs, threads) -> ExperimentConfig:
    cfg = ExperimentConfig.from_dict(load_config(config_path))
    return cfg.with_overrides(seed=seed, runs=runs, threads=threads)


def show_table(table: ResultTable, out: str):
    """
    Print a result table and where it was written.
    """
    view = Table(title=f"{table.axis} sweep ({table.metric})")
    frame = table.to_frame()
    for column in frame.columns:
        view.add_column(column, justify='left' if column == 'variant' else 'right')
    for row in frame.itertuples(index=False):
        view.add_row(*[f"{v:.4f}" if isinstance(v, float) else str(v) for v in row])
    console.print(view)
    console.log(f"Results written to {os.path.join(out, 'results.csv')}")


@click.group()
@click.version_option(version=ngnn.__version__)
def cli():
    """
    NGNN: train graph neural networks with network-in-graph-neural-network blocks and run the
    robustness, depth and position sweeps.
    """
    pass


@cli.command()
@experiment_options
@handle_errors
def train(config_path, out, seed, runs, threads, no_cache, verbose):
    """
    train: train the configured model once per seed and aggregate the results.
    """
    setup_logging(verbose)
    cfg = load_experiment_config(config_path, seed, runs, threads)
    aggregate = train_workflow(cfg, out, use_cache=not no_cache)

    view = Table(title=f"{cfg.model.arch} ({aggregate['metric']})")
    view.add_column('seed', justify='right')
    view.add_column('test', justify='right')
    for s, metric in zip(aggregate['seeds'], aggregate['test_metrics']):
        view.add_row(str(s), f"{metric:.4f}")
    console.print(view)
    print_in_box(f"{aggregate['metric']}: {aggregate['mean']:.4f} ± {aggregate['std']:.4f} over {aggregate['runs']} runs\n"
                 f"parameters: {aggregate['params']}\n"
                 f"epoch time: {aggregate['epoch_s']:.4f}s ± {aggregate['epoch_s_std']:.4f}s",
                 console, title="Aggregate", color="green")


@cli.command('noise-sweep')
@experiment_options
@handle_errors
def noise_sweep_command(config_path, out, seed, runs, threads, no_cache, verbose):
    """
    noise-sweep: accuracy under added or appended Gaussian feature noise, per model variant.
    """
    setup_logging(verbose)
    cfg = load_experiment_config(config_path, seed, runs, threads)
    show_table(noise_sweep(cfg, out, use_cache=not no_cache), out)


@cli.command('edge-noise-sweep')
@experiment_options
@handle_errors
def edge_noise_sweep_command(config_path, out, seed, runs, threads, no_cache, verbose):
    """
    edge-noise-sweep: accuracy after adding random edges in proportion to the existing ones.
    """
    setup_logging(verbose)
    cfg = load_experiment_config(config_path, seed, runs, threads)
    show_table(edge_noise_sweep(cfg, out, use_cache=not no_cache), out)


@cli.command('depth-sweep')
@experiment_options
@handle_errors
def depth_sweep_command(config_path, out, seed, runs, threads, no_cache, verbose):
    """
    depth-sweep: metric, parameter count and epoch time per NGNN depth and hidden width.
    """
    setup_logging(verbose)
    cfg = load_experiment_config(config_path, seed, runs, threads)
    show_table(depth_sweep(cfg, out, use_cache=not no_cache), out)


@cli.command('position-sweep')
@experiment_options
@handle_errors
def position_sweep_command(config_path, out, seed, runs, threads, no_cache, verbose):
    """
    position-sweep: the NGNN block on the input, hidden, output or all GNN layers.
    """
    setup_logging(verbose)
    cfg = load_experiment_config(config_path, seed, runs, threads)
    show_table(position_sweep(cfg, out, use_cache=not no_cache), out)


@cli.command()
@click.option('--config', 'config_path', default=None, help='An experiment or model configuration file.')
@click.option('--arch', type=click.Choice(ARCHS), default=None)
@click.option('--in-dim', type=int, default=None)
@click.option('--hidden', type=int, default=None)
@click.option('--out-dim', type=int, default=None)
@click.option('--layers', type=int, default=None)
@click.option('--heads', type=int, default=None)
@click.option('--position', default=None, help=f"One of {', '.join(POSITIONS)}.")
@click.option('--spec', default=None, help='NGNN spec, e.g. 1-relu+1-sigmoid.')
@handle_errors
def paramcount(config_path, arch, in_dim, hidden, out_dim, layers, heads, position, spec):
    """
    paramcount: the exact trainable parameter count of a model, with a per-layer breakdown.
    """
    data = {}
    if config_path:
        data = load_config(config_path)
        if isinstance(data.get('model'), dict):
            data = data['model']
    overrides = {
        'arch': arch, 'in_dim': in_dim, 'hidden_dim': hidden, 'out_dim': out_dim, 'num_layers': layers,
        'heads': heads, 'ngnn_position': position, 'ngnn_spec': spec,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ModelConfig.from_dict(data)
    model = build_model(cfg, 0)

    view = Table(title=f"{cfg.arch}: {cfg.in_dim} -> {cfg.hidden_dim} x {cfg.num_layers - 1} -> {cfg.out_dim}")
    view.add_column('component')
    view.add_column('parameters', justify='right')
    for name, count in model.param_breakdown():
        view.add_row(name, str(count))
    console.print(view)
    console.print(f"total parameters: {model_param_count(model)}")


@cli.command('gen-synth')
@click.option('--out', required=True, help='The dataset directory to write.')
@click.option('--nodes', type=int, default=2000, show_default=True)
@click.option('--classes', type=int, default=2, show_default=True)
@click.option('--dim', type=int, default=16, show_default=True)
@click.option('--p', 'p', type=float, default=0.02, show_default=True, help='Intra-block edge probability.')
@click.option('--q', 'q', type=float, default=0.002, show_default=True, help='Inter-block edge probability.')
@click.option('--separation', type=float, default=1.0, show_default=True, help='Norm of the class means.')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--link', is_flag=True, help='Also write a link-prediction split under <out>/link.')
@click.option('--negatives', type=int, default=1000, show_default=True, help='Fixed negatives per link split.')
@click.option('--verbose', is_flag=True, help='Log at debug level.')
@handle_errors
def gen_synth(out, nodes, classes, dim, p, q, separation, seed, link, negatives, verbose):
    """
    gen-synth: generate a stochastic block model dataset with Gaussian class features.
    """
    setup_logging(verbose)
    spec = SbmSpec(num_nodes=nodes, num_classes=classes, dim=dim, p=p, q=q, separation=separation, seed=seed)
    dataset = generate_sbm(spec)
    save_node_dataset(dataset, out)
    write_config(os.path.join(out, 'synth.yml'), spec.to_dict())
    lines = [f"nodes: {nodes}", f"edges: {dataset.graph.num_undirected_edges}", f"classes: {classes}",
             f"features: {dim}", f"written to: {out}"]

    if link:
        link_dir = os.path.join(out, 'link')
        save_link_dataset(make_link_split(dataset.graph, dataset.features, num_negatives=negatives, seed=seed),
                          link_dir)
        lines.append(f"link split: {link_dir}")
    print_in_box("\n".join(lines), console, title="Synthetic dataset", color="green")


@cli.command()
@click.argument('name')
def new(name):
    """
    new: create a new experiment directory NAME with a configuration file.
    """
    if not name:
        console.log("Please provide a valid experiment name. Aborted.")
        return

    task = questionary.select("Which task?", choices=list(TASKS)).ask()
    arch = questionary.select("Which GNN architecture?", choices=list(ARCHS)).ask()
    position = questionary.select("Where should the NGNN blocks go?", choices=list(POSITIONS), default='hidden').ask()
    spec = questionary.text("NGNN spec (e.g. 1-relu+1-sigmoid):", default='1-relu').ask()
    dataset = questionary.text("Dataset directory:", default='data').ask()
    if None in (task, arch, position, spec, dataset):
        console.log("Aborted.")
        return

    try:
        config = scaffold_experiment(arch=arch, task=task, position=position, spec=spec, dataset=dataset,
                                     out_dim=2 if task == 'node_class' else 64)
    except (ConfigError, SpecParseError) as e:
        print_in_box(str(e), err_console, title="Configuration error", color="red")
        sys.exit(2)

    project_dir = ensure_dir(os.path.join(os.getcwd(), name))
    write_config(os.path.join(project_dir, CONFIG_FILE), config)
    console.log(f"Experiment created at {os.path.join(project_dir, CONFIG_FILE)}; "
                "set model.in_dim and model.out_dim to match your dataset.")
