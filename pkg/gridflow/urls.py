from django.urls import path, include
from rest_framework.routers import DefaultRouter
from . import views

router = DefaultRouter()
router.register(r'runs', views.SimulationRunViewSet, basename='simulationrun')

urlpatterns = [
    path('auth/login/', views.LoginView.as_view(), name='login'),
    path('auth/logout/', views.LogoutView.as_view(), name='logout'),
    path('', include(router.urls)),
    path('validate-case/', views.CaseValidationView.as_view(), name='validate-case'),
]
