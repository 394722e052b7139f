"""Self-organized free-flight arrival for eVTOL vehicles around a vertiport.

Subpackages:
    geometry     angle arithmetic, CPA, kinematics
    environment  multi-agent airspace world and traffic schedules
    observation  per-agent local observations
    reward       four-component reward
    neural       from-scratch spatial-temporal recurrent actor/critics
    training     LSTM-TD3 trainer, replay buffer, curriculum
    evaluation   scenarios, studies, metrics, KDE
    cli          command line entry point
"""

__version__ = "0.1.0"
