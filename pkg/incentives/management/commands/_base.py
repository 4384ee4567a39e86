"""
Shared plumbing for the mechanism commands: scenario selection and the
mapping from core errors to exit codes (1 usage, 2 load, 3 numerical).
"""
import logging

from django.core.management.base import BaseCommand, CommandError

from incentives.core.constants import (
    EXIT_LOAD, EXIT_NUMERICAL, EXIT_USAGE, MECH_IM1, MECH_M1, OBJECTIVE_WELFARE,
)
from incentives.core.exceptions import LoadError, MechanismError
from incentives.services.scenario_service import ScenarioService

logger = logging.getLogger(__name__)

WELFARE_MECHANISMS = (MECH_IM1, MECH_M1)


class ScenarioCommand(BaseCommand):
    """Base class for commands that operate on one scenario."""

    def add_scenario_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--paper', action='store_true',
                            help='Use the bundled six-unit use case.')
        source.add_argument('--scenario', metavar='PATH',
                            help='Path to a scenario JSON file.')

    def load(self, options, mech=None, validate=True):
        """
        Load the selected scenario. The bundled use case switches to the
        welfare objective for the welfare mechanisms.
        """
        if options['paper']:
            objective = OBJECTIVE_WELFARE if mech in WELFARE_MECHANISMS else None
            return ScenarioService.paper_scenario(objective)
        return ScenarioService.load_scenario(options['scenario'], validate=validate)

    def execute_guarded(self, action):
        """Run ``action`` and translate errors into CommandError exit codes."""
        try:
            return action()
        except CommandError:
            raise
        except LoadError as exc:
            raise CommandError(f"load error: {exc}", returncode=EXIT_LOAD) from exc
        except MechanismError as exc:
            logger.error(f"{type(exc).__name__}: {exc}")
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=EXIT_NUMERICAL) from exc
        except ValueError as exc:
            raise CommandError(f"invalid arguments: {exc}", returncode=EXIT_USAGE) from exc

    @staticmethod
    def usage_error(message):
        return CommandError(message, returncode=EXIT_USAGE)
