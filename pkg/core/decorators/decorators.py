import inspect
from functools import wraps

from core.exceptions import DomainError


def require(condition, message):
    """Raise DomainError when ``condition`` is false for the bound call arguments.

    ``condition`` receives the call's arguments by name (defaults applied), so it can
    declare only the parameters it inspects.
    """

    def decorator(f):
        signature = inspect.signature(f)
        wanted = inspect.signature(condition).parameters

        @wraps(f)
        def decorated_function(*args, **kwargs):
            bound = signature.bind(*args, **kwargs)
            bound.apply_defaults()
            arguments = {name: value for name, value in bound.arguments.items() if name in wanted}
            if not condition(**arguments):
                raise DomainError(f"{f.__name__}: {message}")
            return f(*args, **kwargs)

        return decorated_function

    return decorator
