import os
import logging
import yaml
from typing import Any
from pathlib import Path
from dotenv import load_dotenv

# Configure logging
logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).parent


class Config:
    """Configuration manager for the application"""

    def __init__(self):
        self._config = {}
        self._load_env()
        self._load_yaml()
        self._validate_config()

    def _load_env(self):
        """Load environment variables"""
        load_dotenv(override=True)

        # All environment variables are optional overrides
        self._config['env'] = {
            'curve_params': os.getenv('RINGVOTE_CURVE_PARAMS'),
            'log_level': os.getenv('RINGVOTE_LOG_LEVEL'),
        }

    def _load_yaml(self):
        """Load YAML configuration"""
        config_path = PROJECT_ROOT / 'config.yaml'
        if not config_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {config_path}")

        with open(config_path) as f:
            self._config.update(yaml.safe_load(f))

    def _validate_config(self):
        """Validate configuration"""
        required_keys = ['curve', 'hashing', 'ledger', 'session', 'logging']
        for key in required_keys:
            if key not in self._config:
                raise ValueError(f"Missing required configuration key: {key}")

        hashing_config = self._config.get('hashing', {})
        if int(hashing_config.get('h2p_max_attempts', 0)) < 1:
            raise ValueError("hashing.h2p_max_attempts must be a positive integer")

        ledger_config = self._config.get('ledger', {})
        if int(ledger_config.get('proxy_batch_size', 0)) < 1:
            raise ValueError("ledger.proxy_batch_size must be a positive integer")

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value by key"""
        keys = key.split('.')
        value = self._config
        for k in keys:
            if isinstance(value, dict):
                value = value.get(k)
            else:
                return default
        return default if value is None else value

    @property
    def DEFAULT_CURVE(self) -> str:
        """Get the default curve name or parameter file path"""
        return self.get('env.curve_params') or self.get('curve.default', 'secp256k1')

    @property
    def PARAMS_DIR(self) -> Path:
        """Get the directory holding built-in curve parameter files"""
        return PROJECT_ROOT / self._config['curve']['params_dir']

    @property
    def HASH_NAME(self) -> str:
        """Get the hash primitive name recorded in golden files"""
        return self.get('hashing.name', 'sha256')

    @property
    def H2P_MAX_ATTEMPTS(self) -> int:
        """Get the try-and-increment bound"""
        return int(self._config['hashing']['h2p_max_attempts'])

    @property
    def PROXY_BATCH_SIZE(self) -> int:
        """Get the default anonymization proxy batch size"""
        return int(self._config['ledger']['proxy_batch_size'])

    @property
    def SESSION_DEFAULTS(self) -> dict:
        """Get default session parameters"""
        return dict(self._config['session'])

    @property
    def LOG_LEVEL(self) -> str:
        """Get log level"""
        return self.get('env.log_level') or self.get('logging.level', 'INFO')

    @property
    def LOG_FORMAT(self) -> str:
        """Get log format"""
        return self._config['logging']['format']


# Create a singleton instance
config = Config()
