from .simulate import simulate_cmd
from .path import path_cmd
from .fit import fit_cmd
from .montecarlo import montecarlo_cmd
from .energy import energy_cmd


def register_commands(cli):
    """Register all subcommands with the click group."""
    cli.add_command(simulate_cmd)
    cli.add_command(path_cmd)
    cli.add_command(fit_cmd)
    cli.add_command(montecarlo_cmd)
    cli.add_command(energy_cmd)
