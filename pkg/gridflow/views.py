import json
import logging

import numpy as np
from django.contrib.auth import authenticate
from drf_yasg import openapi
from drf_yasg.utils import swagger_auto_schema
from knox.auth import TokenAuthentication
from knox.models import AuthToken
from knox.views import LoginView as KnoxLoginView, LogoutView as KnoxLogoutView
from rest_framework import mixins, permissions, status, viewsets
from rest_framework.response import Response
from rest_framework.views import APIView

from .engine import run, scenario_from_document
from .exceptions import ConfigurationError, GridflowError
from .grid import load_case
from .models import SimulationRun
from .reporting import summarize
from .serializers import (
    CaseSummarySerializer, NetworkCaseSerializer, ScenarioSerializer,
    SimulationRunDetailSerializer, SimulationRunSerializer,
)

logger = logging.getLogger(__name__)


class LoginView(KnoxLoginView):
    """
    **User Authentication - Login**

    Authenticate user credentials and receive an access token for API requests.
    """
    permission_classes = [permissions.AllowAny]

    @swagger_auto_schema(
        operation_description="Login with username and password to receive authentication token",
        request_body=openapi.Schema(
            type=openapi.TYPE_OBJECT,
            required=['username', 'password'],
            properties={
                'username': openapi.Schema(type=openapi.TYPE_STRING, description='Username'),
                'password': openapi.Schema(type=openapi.TYPE_STRING, description='Password'),
            },
        ),
        responses={
            200: openapi.Response(
                description="Login successful",
                schema=openapi.Schema(
                    type=openapi.TYPE_OBJECT,
                    properties={
                        'token': openapi.Schema(type=openapi.TYPE_STRING, description='Authentication token'),
                        'user': openapi.Schema(
                            type=openapi.TYPE_OBJECT,
                            properties={
                                'id': openapi.Schema(type=openapi.TYPE_INTEGER),
                                'username': openapi.Schema(type=openapi.TYPE_STRING),
                            }
                        ),
                        'expires': openapi.Schema(type=openapi.TYPE_STRING, format='datetime'),
                    }
                )
            ),
            400: openapi.Response(description="Username and password are required"),
            401: openapi.Response(description="Invalid credentials"),
        },
        tags=['Authentication']
    )
    def post(self, request, format=None):
        username = request.data.get('username')
        password = request.data.get('password')

        if not username or not password:
            return Response({
                'error': 'Username and password are required'
            }, status=status.HTTP_400_BAD_REQUEST)

        user = authenticate(request, username=username, password=password)
        if user is None:
            return Response({
                'error': 'Invalid credentials'
            }, status=status.HTTP_401_UNAUTHORIZED)

        instance, token = AuthToken.objects.create(user)
        return Response({
            'token': token,
            'user': {
                'id': user.id,
                'username': user.username,
            },
            'expires': instance.expiry
        })


class LogoutView(KnoxLogoutView):
    """
    Logs out the current token.
    """
    permission_classes = [permissions.IsAuthenticated]
    authentication_classes = [TokenAuthentication]


class SimulationRunViewSet(mixins.CreateModelMixin,
                           mixins.ListModelMixin,
                           mixins.RetrieveModelMixin,
                           viewsets.GenericViewSet):
    """
    **Simulation Runs**

    Submit a scenario document to run it synchronously, list recorded runs
    and fetch one run with its resolved scenario. The scenario's ``case``
    must be a bundled case name or an inline case object.
    """
    queryset = SimulationRun.objects.select_related('owner')
    permission_classes = [permissions.IsAuthenticated]

    def get_serializer_class(self):
        if self.action == 'create':
            return ScenarioSerializer
        if self.action == 'retrieve':
            return SimulationRunDetailSerializer
        return SimulationRunSerializer

    def get_queryset(self):
        queryset = super().get_queryset()
        if self.request.user.is_staff:
            return queryset
        return queryset.filter(owner=self.request.user)

    @swagger_auto_schema(
        operation_description="Run a scenario and record its summary",
        request_body=ScenarioSerializer,
        responses={
            201: SimulationRunDetailSerializer,
            400: openapi.Response(description="Invalid scenario or case"),
            422: openapi.Response(description="The simulation failed after it started"),
        },
        tags=['Simulation']
    )
    def create(self, request, *args, **kwargs):
        try:
            scenario = scenario_from_document(request.data)
        except GridflowError as e:
            return Response(e.as_dict(), status=status.HTTP_400_BAD_REQUEST)

        record = SimulationRun(
            owner=request.user,
            name=scenario.name,
            source='api',
            scenario=scenario.as_document(),
            seed=scenario.seed,
            duration=scenario.duration,
            constraint_enabled=scenario.switches.constraint,
            penalty_enabled=scenario.switches.penalty,
            meter_noise=scenario.meter_sigma,
        )
        try:
            trace = run(scenario)
        except ConfigurationError as e:
            return Response(e.as_dict(), status=status.HTTP_400_BAD_REQUEST)
        except (GridflowError, ArithmeticError, np.linalg.LinAlgError) as e:
            logger.warning("Simulation %s failed: %s", scenario.name or '<inline>', e)
            record.status = 'failed'
            record.error = str(e)
            record.save()
            return Response(SimulationRunDetailSerializer(record).data,
                            status=status.HTTP_422_UNPROCESSABLE_ENTITY)

        watch = [int(line) for line in scenario.document.get('line_limits', {})]
        record.summary = json.loads(json.dumps(summarize(trace, watch_lines=watch).as_dict()))
        record.save()
        return Response(SimulationRunDetailSerializer(record).data, status=status.HTTP_201_CREATED)


class CaseValidationView(APIView):
    """
    **Case Validation**

    Schema- and structure-check a network case document without running it.
    """
    permission_classes = [permissions.IsAuthenticated]

    @swagger_auto_schema(
        operation_description="Validate a network case document",
        request_body=NetworkCaseSerializer,
        responses={
            200: CaseSummarySerializer,
            400: openapi.Response(description="The case is malformed"),
        },
        tags=['Simulation']
    )
    def post(self, request):
        try:
            case = load_case(request.data)
        except GridflowError as e:
            return Response(e.as_dict(), status=status.HTTP_400_BAD_REQUEST)
        summary = CaseSummarySerializer({
            'valid': True,
            'buses': case.n_buses,
            'lines': case.n_lines,
            'generators': case.n_generators,
            'loads': len(case.loads),
            'demand_mw': case.demand_mw(0.0),
        })
        return Response(summary.data)
