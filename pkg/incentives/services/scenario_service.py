import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from incentives.core.exceptions import LoadError
from incentives.core.model import DesignerObjective, Scenario, validate_scenario
from incentives.serializers import ScenarioSerializer, scenario_to_document

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent.parent / 'data'
REFERENCE_SCENARIO_PATH = DATA_DIR / 'reference_use_case.json'


def _first_error(errors: Any, path: str = '') -> Tuple[str, str]:
    """Walk DRF's nested error structure down to the first message."""
    if isinstance(errors, dict):
        key, value = next(iter(errors.items()))
        if key == 'non_field_errors':
            return _first_error(value, path)
        return _first_error(value, f"{path}.{key}" if path else str(key))
    if isinstance(errors, list):
        for index, value in enumerate(errors):
            if value:
                nested = isinstance(value, (dict, list))
                return _first_error(value, f"{path}[{index}]" if nested else path)
        return path, 'invalid'
    return path, str(errors)


class ScenarioService:
    """Loads, validates and writes scenario documents."""

    @staticmethod
    def parse_scenario(document: Dict[str, Any], source: str = '<document>', validate: bool = True) -> Scenario:
        """
        Build a validated Scenario from a parsed JSON object.

        Raises:
            LoadError: naming the offending key for schema errors, or the
                violated invariant when ``validate_scenario`` fails.
        """
        if not isinstance(document, dict):
            raise LoadError(f"{source}: top level must be a JSON object")
        serializer = ScenarioSerializer(data=document)
        if not serializer.is_valid():
            key, message = _first_error(serializer.errors)
            logger.error(f"Invalid scenario {source}: {key}: {message}")
            raise LoadError(f"{source}: {key}: {message}", key=key)

        scenario = serializer.to_scenario()
        if not validate:
            return scenario
        report = validate_scenario(scenario)
        if not report.passed:
            failure = report.first_failure
            raise LoadError(f"{source}: {failure.name} ({failure.message})", key=failure.name)
        return scenario

    @staticmethod
    def load_scenario(path: Union[str, Path], validate: bool = True) -> Scenario:
        path = Path(path)
        try:
            text = path.read_text(encoding='utf-8')
        except OSError as exc:
            raise LoadError(f"cannot read scenario file {path}: {exc}") from exc
        except UnicodeDecodeError as exc:
            raise LoadError(f"{path}: not UTF-8 text (byte {exc.start}): {exc.reason}") from exc
        try:
            document = json.loads(text)
        except json.JSONDecodeError as exc:
            raise LoadError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}", line=exc.lineno) from exc
        scenario = ScenarioService.parse_scenario(document, source=str(path), validate=validate)
        logger.info(f"Loaded scenario '{scenario.name}' with {scenario.n} players from {path}")
        return scenario

    @staticmethod
    def write_scenario(scenario: Scenario, path: Union[str, Path]) -> None:
        """Write the canonical document of ``scenario``."""
        Path(path).write_text(
            json.dumps(scenario_to_document(scenario), indent=2) + '\n', encoding='utf-8'
        )

    @staticmethod
    def paper_scenario(objective: Optional[str] = None) -> Scenario:
        """
        The bundled six-unit use case: B=3, beta=3 for every unit, x0=0.5,
        p0=0.3, kappa_d=0.05, phi=0.3 and success threshold 2.5.

        ``objective='welfare'`` swaps the linear global objective for social
        welfare (the M1/IM1 runs on the same units).
        """
        scenario = ScenarioService.load_scenario(REFERENCE_SCENARIO_PATH)
        if objective == 'welfare':
            scenario = scenario.with_objective(DesignerObjective.welfare())
        elif objective not in (None, scenario.objective.kind):
            raise ValueError(f"unknown objective '{objective}'")
        return scenario
