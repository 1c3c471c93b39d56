class InputError(ValueError):
    """Raised for malformed or unreadable user input (logs, models, configs)."""


class SchemaError(InputError):
    def __init__(self, column, available=()):
        self.column = column
        msg = f"missing configured column {column!r}"
        if available:
            msg += f" (header has: {', '.join(available)})"
        super().__init__(msg)


class RowError(InputError):
    def __init__(self, row_index, message):
        self.row_index = row_index
        super().__init__(f"line {row_index}: {message}")


class ModelError(InputError):
    pass


class ConfigError(InputError):
    pass
