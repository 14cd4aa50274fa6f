import math
from numbers import Complex, Integral, Real


def convert_value(value, precision=12):
    if value is None:
        return ""
    if isinstance(value, bool) or isinstance(value, Integral):
        return str(int(value))
    if isinstance(value, Real):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return f"{value:.{precision}e}"
    if isinstance(value, Complex):
        raise TypeError("complex values must be split into real and imaginary columns")
    return str(value)


class Serializer:
    """Turns report rows into ordered CSV records.

    ``serialization_fields`` maps column name to attribute (or key) name; callables are
    invoked, complex values must be pre-split by the caller.
    """

    def __init__(self, serialization_fields, precision=12):
        self.serialization_fields = dict(serialization_fields)
        self.precision = precision

    @property
    def header(self):
        return list(self.serialization_fields)

    def serialize(self, instance):
        serialized_data = {}
        for key, attr_name in self.serialization_fields.items():
            if isinstance(instance, dict):
                attr = instance.get(attr_name)
            else:
                attr = getattr(instance, attr_name, None)
            if callable(attr):
                attr = attr()
            serialized_data[key] = convert_value(attr, self.precision)
        return serialized_data

    def serialize_many(self, instances):
        return [self.serialize(instance) for instance in instances]
