ARTIFACT_NAME = "consentaneous-bursts"
__version__ = "0.1.0"
