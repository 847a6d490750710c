from .experiment_facade import ExperimentFacade

__all__ = ['ExperimentFacade']
