"""Exception hierarchy shared across the toolkit.

Every failure the package raises on purpose derives from :class:`AntiforensicsError`,
so callers (the CLI in particular) can map whole families to exit codes without
enumerating leaf classes.
"""


class AntiforensicsError(Exception):
    """Base class for all errors raised deliberately by this package."""


# --- image I/O -------------------------------------------------------------

class ImageIOError(AntiforensicsError):
    """Problem reading or writing an image file."""


class FileMissingError(ImageIOError):
    """The referenced path does not exist or is not a regular file."""


class MalformedImageError(ImageIOError):
    """The file exists but is not a decodable image of the expected format."""


class UnsupportedDepthError(ImageIOError):
    """Bit depth outside the supported 8-bit range (e.g. 16-bit or 1-bit PNG)."""


class AlphaChannelError(ImageIOError):
    """Image carries an alpha channel and the caller asked for strict mode."""


class UnquantizedBufferError(ImageIOError):
    """A float buffer reached a sink that only accepts quantized 8-bit data."""


# --- JPEG codec ------------------------------------------------------------

class JpegError(AntiforensicsError):
    """Base class for codec failures."""


class JpegParseError(JpegError):
    """Bitstream is not a well-formed JPEG (truncation, bad marker, bad lengths).

    Carries ``offset`` (byte position, when known) to ease debugging.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedJpegError(JpegError):
    """Well-formed stream using features outside the baseline subset
    (progressive scans, arithmetic coding, 12-bit precision, >2x subsampling...)."""


# --- worker protocol -------------------------------------------------------

class WorkerError(AntiforensicsError):
    """Base class for model-worker failures."""


class WorkerProtocolError(WorkerError):
    """Worker spoke something other than the line protocol (bad handshake,
    unparseable status, missing output file)."""


class WorkerContractError(WorkerError):
    """Worker answered cleanly but its result violates a task contract
    (wrong output dimensions, detection score outside [0, 1])."""


class WorkerTimeoutError(WorkerError):
    """Worker did not answer a request within the configured timeout."""


class WorkerExitError(WorkerError):
    """Worker process died or reported a fatal error status."""


# --- tabular inputs --------------------------------------------------------

class SchemaError(AntiforensicsError):
    """CSV/config input violates the documented schema.

    ``line`` is the 1-based line number of the offending row when applicable.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(AntiforensicsError):
    """Config file could not be parsed or contains unknown/ill-typed keys."""
