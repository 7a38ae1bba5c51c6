"""
Custom exceptions for the sensitive-pixel defense toolkit
"""


class PixelDefenseError(Exception):
    """Base exception for application"""
    pass


class InvalidConfigError(PixelDefenseError):
    """Invalid hyperparameter, flag or config-file value"""
    pass


class InvalidInputShapeError(PixelDefenseError):
    """Input tensor does not match the network's input shape"""
    pass


class DatasetError(PixelDefenseError):
    """Dataset-related errors"""
    pass


class DatasetNotFoundError(DatasetError):
    """Dataset file not found"""
    pass


class DatasetFormatError(DatasetError):
    """Malformed IDX or CIFAR-10 file"""
    pass


class ModelError(PixelDefenseError):
    """Model file errors"""
    pass


class ModelNotFoundError(ModelError):
    """Model file not found"""
    pass


class ModelFormatError(ModelError):
    """Malformed model file or layer shapes that do not compose"""
    pass


class TrainingDivergedError(PixelDefenseError):
    """Training loss became non-finite"""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"Training diverged at epoch {epoch} (loss={loss})")


class AttackExhaustedError(PixelDefenseError):
    """Too few images could be fooled within the resample bound"""
    pass


class PopulationTooSmallError(PixelDefenseError):
    """Differential evolution needs at least four individuals"""
    pass


class PointOutOfBoundsError(PixelDefenseError):
    """Pixel coordinate outside the image"""
    pass


class AdversarialSetError(PixelDefenseError):
    """Missing or malformed adversarial-set directory"""
    pass


class ReportError(PixelDefenseError):
    """Report could not be written or read"""
    pass
