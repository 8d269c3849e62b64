"""A central module for all errors that colormapgan raises."""


class ConfigError(TypeError):
    pass

class ColorRangeError(ValueError):
    pass

class EmptyDatasetError(ValueError):
    pass

class ImageFormatError(ValueError):
    pass

class MaskFormatError(ValueError):
    pass

class ShapeMismatchError(ValueError):
    pass

class InputTooSmallError(ValueError):
    def __init__(self, message: str, minimum: int):
        super().__init__(message)
        self.minimum = minimum

class InvalidConfigError(ValueError):
    def __init__(self, message: str, field: str):
        super().__init__(message)
        self.field = field

class PayloadError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position

class StitchConflictError(ValueError):
    def __init__(self, message: str, coordinate: tuple[int, int]):
        super().__init__(message)
        self.coordinate = coordinate

class MissingArtifactError(FileNotFoundError):
    def __init__(self, artifact):
        super().__init__(f"Missing prerequisite artifact: {artifact}")
        self.artifact = artifact

class UnsupervisedContractError(PermissionError):
    pass
