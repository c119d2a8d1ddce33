from pydantic import BaseModel


class ValidateBaseModel(BaseModel, validate_assignment=True):
    """
    This model simply sets up BaseModel with the validate_assignment flag to True, so we don't have to keep specifying
    it or forget to specify it in our configuration models where we want assignment validation
    """

    pass


class ArrayModel(BaseModel, arbitrary_types_allowed=True, copy_on_model_validation="none"):
    """
    Base for models that carry numpy arrays. Arrays are validated by the subclasses, pydantic only checks their type.
    """

    pass
