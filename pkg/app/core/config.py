import os
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings


class NumericsConfig(BaseSettings):
    """Numerical limits shared by the propagators and oracles"""
    dense_cap: int = Field(default=14, ge=1, le=20)
    norm_tolerance: float = Field(default=1e-6, gt=0)
    unitarity_tolerance: float = Field(default=1e-8, gt=0)
    degeneracy_tolerance: float = Field(default=1e-10, gt=0)

    class Config:
        env_prefix = "NUMERICS_"
        case_sensitive = False


class ExecutionConfig(BaseSettings):
    """Worker pool configuration for trajectory batches"""
    max_workers: int = Field(default=max(1, min(8, os.cpu_count() or 1)))
    trajectory_chunk: int = Field(default=256)

    @field_validator('max_workers', 'trajectory_chunk', mode='after')
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError('must be a positive integer')
        return v

    class Config:
        env_prefix = "EXECUTION_"
        case_sensitive = False


class LoggingSettings(BaseSettings):
    """Logging destinations"""
    level: str = Field(default="INFO")
    dir: str = Field(default="logs")
    json_file: bool = Field(default=False)

    @field_validator('level', mode='after')
    @classmethod
    def validate_level(cls, v):
        allowed = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
        if v.upper() not in allowed:
            raise ValueError(f'level must be one of {allowed}')
        return v.upper()

    class Config:
        env_prefix = "LOG_"
        case_sensitive = False


class SentrySettings(BaseSettings):
    """Optional error reporting"""
    dsn: Optional[str] = Field(default=None)
    release: Optional[str] = Field(default=None)

    class Config:
        env_prefix = "SENTRY_"
        case_sensitive = False


class AppConfig(BaseSettings):
    """Main application configuration"""
    app_name: str = Field(default="Rydberg DSF Simulator")
    debug: bool = Field(default=False)
    environment: str = Field(default="development")

    numerics: NumericsConfig = NumericsConfig()
    execution: ExecutionConfig = ExecutionConfig()
    logging: LoggingSettings = LoggingSettings()
    sentry: SentrySettings = SentrySettings()

    @field_validator('environment', mode='after')
    @classmethod
    def validate_environment(cls, v):
        allowed = ['development', 'staging', 'production']
        if v not in allowed:
            raise ValueError(f'environment must be one of {allowed}')
        return v

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False
        extra = "ignore"


# Create a global config instance
config = AppConfig()


def get_config() -> AppConfig:
    """Get the application configuration"""
    return config


def get_numerics_config() -> NumericsConfig:
    """Get numerical limits"""
    return config.numerics


def get_execution_config() -> ExecutionConfig:
    """Get worker pool configuration"""
    return config.execution
