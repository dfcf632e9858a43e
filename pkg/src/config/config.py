from pathlib import Path
from typing import Dict
from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict


BASE_PATH_PROJECT = Path(__file__).resolve().parent.parent
BASE_PATH = BASE_PATH_PROJECT.parent
load_dotenv(BASE_PATH.joinpath(".env"))


class Settings(BaseSettings):
    app_mode: str = "prod"
    app_version: str = "0.1.0"
    app_name: str = "trajnet"
    max_workers: int = 4
    checkpoint_format_version: int = 1
    default_emd_order: int = 1
    plot_grid_points: int = 41
    svg_hashsalt: str = "trajnet"

    @classmethod
    def from_dict(cls, settings_dict: Dict) -> "Settings":
        return cls(**settings_dict)

    model_config = SettingsConfigDict(
        extra="ignore",
        env_file=BASE_PATH.joinpath(".env"),
        env_file_encoding="utf-8",
    )


settings = Settings()

if __name__ == "__main__":
    print(f"{settings.model_config['env_file']=}")
    print(f"{settings=}")
