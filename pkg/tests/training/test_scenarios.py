import pytest
from pydantic import ValidationError

from peftt.exceptions import ConfigError
from peftt.training.scenarios import ABBREVIATIONS, Scenario, default_lr, resolve_abbreviation


class TestAbbreviations:
    def test_every_combination(self):
        """Five model prefixes times four mode suffixes."""
        assert len(ABBREVIATIONS) == 20
        assert ABBREVIATIONS["CSP"] == ("cino-small", "prompt")
        assert ABBREVIATIONS["TBAP"] == ("tibetan-bert", "adapter_prompt")
        assert ABBREVIATIONS["TW"] == ("tibert", "full")
        assert ABBREVIATIONS["CLA"] == ("cino-large", "adapter")

    def test_case_and_desk_suffix(self):
        """Names are case-insensitive and -desk marks the desk encoder."""
        assert resolve_abbreviation("tbap-desk") == ("tibetan-bert", "adapter_prompt", True)
        assert resolve_abbreviation("CBW") == ("cino-base", "full", False)

    def test_unknown(self):
        """Unknown names list the valid ones."""
        with pytest.raises(ConfigError, match="TBAP"):
            resolve_abbreviation("XYZ")


class TestLearningRates:
    @pytest.mark.parametrize(
        "name, lr",
        [
            ("CSW", 5e-6),
            ("TBP", 6e-6),
            ("CBA", 1e-4),
            ("CSAP", 1.5e-4),
            ("TA", 3e-4),
            ("TBAP", 5e-4),
        ],
    )
    def test_defaults(self, name: str, lr: float):
        """Each family and mode has its default learning rate."""
        assert Scenario.from_abbreviation(name).learning_rate == lr

    def test_custom_family(self):
        """Custom encoders use the non-CINO adapter rates."""
        assert default_lr("custom", "adapter") == 3e-4


class TestScenario:
    def test_from_abbreviation(self):
        """Defaults fill in everything not overridden."""
        scenario = Scenario.from_abbreviation("CLAP-desk", lr=None, epochs=3)
        assert scenario.encoder_key == "cino-large"
        assert scenario.desk
        assert scenario.batch_size == 4
        assert scenario.epochs == 3
        assert scenario.uses_prompt and scenario.uses_adapters

    def test_overrides(self):
        """Explicit values win over defaults."""
        scenario = Scenario.from_abbreviation("TBA-desk", lr=1e-3, batch_size=8)
        assert scenario.learning_rate == 1e-3
        assert scenario.batch_size == 8
        assert not scenario.uses_prompt

    def test_validation(self):
        """Zero epochs and non-positive rates are rejected."""
        with pytest.raises(ValidationError):
            Scenario.from_abbreviation("TBA-desk", epochs=0)
        with pytest.raises(ValidationError):
            Scenario.from_abbreviation("TBA-desk", lr=-1.0)
        with pytest.raises(ValidationError):
            Scenario.from_abbreviation("TBA-desk", rank=0)
