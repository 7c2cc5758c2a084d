"""Configuration for PSH Extension Lab."""

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Settings from environment variables (PSH_LAB_*), no .env files."""

    model_config = SettingsConfigDict(env_prefix="PSH_LAB_", extra="ignore")

    log_level: str = "INFO"
    seed: int = 20240601

    # Quadrature
    quadrature_nodes: int = 64
    certify_quadrature_nodes: int = 32
    direction_count: int = 16

    # Certifiers: violation tolerance multiplies r²
    certify_tol: float = 1e-3
    certify_radius_factors: tuple[float, ...] = (0.5, 1.0)
    psh_margin_factor: float = 2.0
    witness_limit: int = 10

    # PSD tolerance knob c_H
    psd_c: float = 1.0

    # Envelope
    envelope_tol: float = 1e-11
    max_iter_factor: int = 50
    contact_tol_factor: float = 10.0

    # Pipeline
    margin_factor: float = 1.5
    chain_tol: float = 0.5
    final_tol: float = 0.05
    collar_tol: float = 1e-12
    radius_factors: tuple[float, ...] = (1.0, 2.0, 4.0)
    points_per_axis: int = 17

    # Points per vectorised evaluation batch
    chunk_size: int = 200_000


settings = Settings()
