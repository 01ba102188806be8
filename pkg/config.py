"""
Configuration management for the incentive lab.
Loads environment variables and provides run-profile classes.
"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _env(name: str, default: str) -> str:
    return os.getenv(f'LOBLAB_{name}', default)


class Config:
    """Base configuration class."""

    PROFILE = _env('PROFILE', 'full')

    # Run plumbing
    SEED = int(_env('SEED', '20240601'))
    OUTPUT_DIR = _env('OUTPUT_DIR', 'results')
    LOG_LEVEL = _env('LOG_LEVEL', 'INFO')
    N_JOBS = int(_env('N_JOBS', '1'))

    # Value solver grid ($, min)
    VALUE_DX = float(_env('VALUE_DX', '1e-3'))
    VALUE_DT = float(_env('VALUE_DT', '1e-2'))
    THETA = float(_env('THETA', '0.5'))

    # Book simulator grid
    SIM_DX = float(_env('SIM_DX', '1e-3'))
    SIM_DT = float(_env('SIM_DT', '1e-3'))
    HORIZON = float(_env('HORIZON', '30'))
    N_PATHS = int(_env('N_PATHS', '200'))

    # Feynman-Kac Monte Carlo
    MC_PATHS = int(_env('MC_PATHS', '100000'))
    MC_DT = float(_env('MC_DT', '1e-3'))

    # Per-limit table convention: 'point' or 'interval'
    TABLE_CONVENTION = _env('TABLE_CONVENTION', 'point')

    @classmethod
    def validate(cls):
        """
        Validate the configuration.
        Raises ValueError listing every violation.
        """
        errors = []

        if not 0 <= cls.SEED < 2 ** 64:
            errors.append(f"SEED must be a 64-bit unsigned integer, got {cls.SEED}")

        for name in ('VALUE_DX', 'VALUE_DT', 'SIM_DX', 'SIM_DT', 'HORIZON', 'MC_DT'):
            if getattr(cls, name) <= 0:
                errors.append(f"{name} must be > 0, got {getattr(cls, name)}")

        if cls.N_PATHS < 2:
            errors.append(f"N_PATHS must be ≥ 2, got {cls.N_PATHS}")

        if cls.MC_PATHS < 1:
            errors.append(f"MC_PATHS must be ≥ 1, got {cls.MC_PATHS}")

        if cls.N_JOBS == 0:
            errors.append("N_JOBS must be nonzero (negative counts from the CPU total)")

        if not 0 <= cls.THETA <= 1:
            errors.append(f"THETA must lie in [0, 1], got {cls.THETA}")

        if cls.TABLE_CONVENTION not in ('point', 'interval'):
            errors.append(f"TABLE_CONVENTION must be 'point' or 'interval', got '{cls.TABLE_CONVENTION}'")

        if cls.LOG_LEVEL.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR'):
            errors.append(f"LOG_LEVEL must be DEBUG, INFO, WARNING or ERROR, got '{cls.LOG_LEVEL}'")

        if errors:
            raise ValueError(f"Configuration validation failed:\n" + "\n".join(f"  - {err}" for err in errors))

    @classmethod
    def display(cls):
        """Display the current configuration."""
        print("=" * 50)
        print("Incentive Lab Configuration")
        print("=" * 50)
        print(f"Profile: {cls.PROFILE}")
        print(f"Seed: {cls.SEED}")
        print(f"Output: {cls.OUTPUT_DIR}")
        print(f"Value grid: dx={cls.VALUE_DX:g}, dt={cls.VALUE_DT:g}, theta={cls.THETA}")
        print(f"Simulator grid: dx={cls.SIM_DX:g}, dt={cls.SIM_DT:g}, T={cls.HORIZON:g} min")
        print(f"Paths: {cls.N_PATHS} book, {cls.MC_PATHS:,} Monte Carlo (dt={cls.MC_DT:g})")
        print(f"Workers: {cls.N_JOBS}")
        print("=" * 50)


class FullConfig(Config):
    """Acceptance-size grids and path counts."""

    PROFILE = 'full'


class QuickConfig(Config):
    """Coarse grids and few paths for smoke runs."""

    PROFILE = 'quick'

    VALUE_DX = float(_env('VALUE_DX', '2e-3'))
    VALUE_DT = float(_env('VALUE_DT', '2e-2'))
    SIM_DX = float(_env('SIM_DX', '2e-3'))
    SIM_DT = float(_env('SIM_DT', '2e-3'))
    HORIZON = float(_env('HORIZON', '10'))
    N_PATHS = int(_env('N_PATHS', '20'))
    MC_PATHS = int(_env('MC_PATHS', '4096'))

    LOG_LEVEL = _env('LOG_LEVEL', 'DEBUG')


def get_config(profile: str = None):
    """
    Get the configuration class of a profile.

    Args:
        profile: 'full' or 'quick' (default: LOBLAB_PROFILE)

    Returns:
        Config class (FullConfig or QuickConfig)
    """
    profile = (profile or _env('PROFILE', 'full')).lower()

    if profile == 'quick':
        config = QuickConfig
    elif profile == 'full':
        config = FullConfig
    else:
        raise ValueError(f"Configuration validation failed:\n  - PROFILE must be 'full' or 'quick', got '{profile}'")

    config.validate()

    return config


if __name__ == '__main__':
    try:
        config = get_config()
        config.display()
    except ValueError as e:
        print(f"❌ Configuration Error:\n{e}")
