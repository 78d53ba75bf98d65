"""
Configuration management for Pseudospherical Lab
"""

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings"""

    model_config = SettingsConfigDict(
        env_prefix="PSS_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Worker Configuration
    threads: int = 4

    # Application Settings
    log_level: str = "INFO"

    # Symbolic Configuration
    kmax: int = 5
    max_jet_order: int = 12

    # Numeric Guards
    div_eps: float = 1e-12
    delta_eps: float = 1e-9
    den_eps: float = 1e-9
    blowup_threshold: float = 1e6

    # ODE Integration (coefficient ODE)
    ode_rtol: float = 1e-11
    ode_atol: float = 1e-12

    # Frame Transport
    ortho_interval: int = 16
    ortho_tol: float = 1e-8
    genericity_eps: float = 1e-6
    gauss_tol: float = 1e-10
    codazzi_tol: float = 1e-8


# Global settings instance
settings = Settings()
