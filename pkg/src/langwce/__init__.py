"""langwce: language-weighted cross-entropy training on a synthetic tone-language benchmark."""

__version__ = "0.1.0"
