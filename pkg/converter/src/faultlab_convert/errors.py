class ConvertError(Exception):
    """Any conversion failure: unknown source, bad mapping, bad shapes."""
