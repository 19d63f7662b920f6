from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional


class Settings(BaseSettings):
    # Scan execution; the only knob the CLI reads from the environment
    SCAN_THREADS: int = 1

    # Server Settings
    HOST: str = "0.0.0.0"
    PORT: int = 8000
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # Upper bound on atoms accepted by the HTTP surface per request
    API_MAX_ATOMS: int = 20000

    model_config = SettingsConfigDict(env_file=".env", extra="ignore")


_settings_instance: Optional[Settings] = None


def get_settings() -> Settings:
    """Get settings instance. Built once per process from the environment and .env."""
    global _settings_instance
    if _settings_instance is None:
        _settings_instance = Settings()
        if _settings_instance.SCAN_THREADS < 1:
            print("WARNING: SCAN_THREADS must be at least 1; falling back to a single thread.")
            _settings_instance.SCAN_THREADS = 1
    return _settings_instance


def clear_settings_cache():
    """Clear the settings cache. Useful for testing or when .env changes."""
    global _settings_instance
    _settings_instance = None
